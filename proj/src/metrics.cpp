#include "decs/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace decs {

double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n) throw std::invalid_argument("need 0 <= c <= n");
    if (k < 1 || k > n) throw std::invalid_argument("need 1 <= K <= n");
    if (n - c < k) return 1.0;
    // C(n-c, K) / C(n, K) = prod_{i=0}^{K-1} (n - c - i) / (n - i)
    double ratio = 1.0;
    for (int i = 0; i < k; ++i)
        ratio *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    return 1.0 - ratio;
}

double aes(double pass, double pass_base, double mean_tokens, double mean_tokens_base) {
    if (pass_base <= 0.0 || mean_tokens_base <= 0.0)
        throw std::invalid_argument("aes baselines must be positive");
    const double token_term = (mean_tokens_base - mean_tokens) / mean_tokens_base;
    if (pass >= pass_base) return token_term + 3.0 * (pass - pass_base) / pass_base;
    return token_term - 5.0 * (pass_base - pass) / pass_base;
}

std::optional<double> pnrp(std::span<const PnrpSample> samples) {
    if (samples.empty()) return std::nullopt;
    double k_sum = 0.0, t_sum = 0.0;
    for (const auto& s : samples) {
        k_sum += s.kstar;
        t_sum += s.thinking_len;
    }
    if (t_sum <= 0.0) return std::nullopt;
    return k_sum / t_sum;
}

LogLinearFit fit_log_linear(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw std::invalid_argument("need at least 2 points");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : points) {
        if (x <= 0.0) throw std::invalid_argument("token counts must be positive");
        sx += std::log2(x);
        sy += y;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        const double dx = std::log2(x) - mx;
        sxx += dx * dx;
        sxy += dx * (y - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("degenerate x values");
    LogLinearFit fit;
    fit.a = sxy / sxx;
    fit.b = my - fit.a * mx;
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& [x, y] : points) {
        const double pred = fit.a * std::log2(x) + fit.b;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - my) * (y - my);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

}  // namespace decs
