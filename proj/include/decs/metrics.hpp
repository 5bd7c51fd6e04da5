#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace decs {

// Unbiased pass@K: 1 - C(n-c, K) / C(n, K), evaluated in telescoping product
// form to stay exact for large n.
double pass_at_k(int n, int c, int k);

// Accuracy-efficiency score. Pass inputs may be percent or fraction; only
// ratios of them appear.
double aes(double pass, double pass_base, double mean_tokens, double mean_tokens_base);

// Proportion of NRP tokens among thinking tokens of correct rollouts with a
// resolved K*. Empty input -> absent.
struct PnrpSample {
    int kstar = 0;
    int thinking_len = 0;
};
std::optional<double> pnrp(std::span<const PnrpSample> samples);

struct LogLinearFit {
    double a = 0.0;   // slope on log2(tokens)
    double b = 0.0;   // intercept
    double r2 = 0.0;
};

// Least-squares fit of y = a * log2(x) + b.
LogLinearFit fit_log_linear(std::span<const std::pair<double, double>> points);

struct EvalSummary {
    int prompt_class = 0;
    int n = 0;
    int c = 0;
    std::map<int, double> pass_at;
    double mean_tokens = 0.0;
    std::optional<double> pnrp;
};

}  // namespace decs
