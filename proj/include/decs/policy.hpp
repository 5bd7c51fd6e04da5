#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decs/rng.hpp"
#include "decs/vocab.hpp"

namespace decs {

// Conditioning state: prompt class plus a fixed-capacity suffix window of the
// last `order` generated tokens. Contexts compare by value.
struct Context {
    int prompt_class = 0;
    std::vector<TokenId> suffix;  // length <= order

    auto operator<=>(const Context&) const = default;

    Context advanced(TokenId tok, int order) const {
        Context next = *this;
        next.suffix.push_back(tok);
        if (static_cast<int>(next.suffix.size()) > order)
            next.suffix.erase(next.suffix.begin());
        return next;
    }
};

// Per-(context, token) advantage values. Tokens absent from a row carry
// advantage 0.
using TokenAdvantageMap = std::map<Context, std::vector<double>>;

struct PpoSample {
    Context ctx;
    TokenId token = 0;
    double advantage = 0.0;
    double old_prob = 0.0;
};

// Exact tabular softmax autoregressive policy. Rows missing from the table
// default to the all-zeros logit vector (uniform next-token distribution).
class TabularPolicy {
public:
    TabularPolicy() = default;  // empty placeholder; fill via assignment
    TabularPolicy(int vocab_size, int context_order, double learning_rate)
        : vocab_size_(vocab_size), order_(context_order), eta_(learning_rate) {}

    int vocab_size() const { return vocab_size_; }
    int context_order() const { return order_; }
    double learning_rate() const { return eta_; }
    void set_learning_rate(double eta) { eta_ = eta; }

    const std::vector<double>& logits(const Context& ctx) const;
    void set_logits(const Context& ctx, std::vector<double> row);
    void add_logit(const Context& ctx, TokenId tok, double delta);
    size_t row_count() const { return table_.size(); }

    // Softmax of the logit row; sums to 1 within 1e-12.
    std::vector<double> next_dist(const Context& ctx) const;

    TokenId sample_token(const Context& ctx, RngStream& rng) const;

    // Exact-expectation policy gradient step: z += eta * pi * A elementwise.
    // Requires the policy-weighted advantage mean of every supplied row to be
    // zero within `centering_tol` (the identity is an expectation statement
    // and holds exactly only for centered advantages).
    void pg_update_exact(const TokenAdvantageMap& adv, double centering_tol = 1e-9);

    // One gradient-ascent step on the clipped PPO surrogate, token-mean
    // normalized over the batch.
    void ppo_update(const std::vector<PpoSample>& batch, double clip_eps);

    void save(std::ostream& out) const;
    static TabularPolicy load(std::istream& in, double learning_rate);
    void save_file(const std::string& path) const;
    static TabularPolicy load_file(const std::string& path, double learning_rate);

    bool operator==(const TabularPolicy& other) const {
        return vocab_size_ == other.vocab_size_ && order_ == other.order_ &&
               table_ == other.table_;
    }

private:
    int vocab_size_ = 0;
    int order_ = 0;
    double eta_ = 0.0;
    std::map<Context, std::vector<double>> table_;
    static const std::vector<double>& zero_row(int n);
};

std::vector<double> softmax(std::span<const double> logits);

}  // namespace decs
