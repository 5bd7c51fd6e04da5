#pragma once

#include <optional>
#include <vector>

#include "decs/policy.hpp"
#include "decs/rng.hpp"
#include "decs/vocab.hpp"

namespace decs {

struct Prompt {
    int prompt_class = 0;
    TokenId target_answer = 0;  // in Vocab.answer_tokens
    double difficulty = 0.0;    // in [0, 1]
};

// One sampled token sequence. Positions are 1-based in the spec sense; the
// thinking segment is tokens[0 .. think_end_pos-1) when think_end_pos is set.
struct Rollout {
    std::vector<TokenId> tokens;
    std::optional<int> think_end_pos;  // 1-based position of think_end
    std::optional<TokenId> final_answer;
    bool correct = false;
    std::optional<int> nrp_end;  // K*, 1-based index into the thinking segment
    bool truncated = false;

    int length() const { return static_cast<int>(tokens.size()); }
    int thinking_len() const {
        return think_end_pos ? *think_end_pos - 1 : length();
    }
    std::vector<TokenId> thinking_tokens() const {
        return {tokens.begin(), tokens.begin() + thinking_len()};
    }
};

struct RolloutGroup {
    Prompt prompt;
    std::vector<Rollout> rollouts;

    bool is_all_correct() const {
        for (const auto& r : rollouts)
            if (!r.correct) return false;
        return !rollouts.empty();
    }
    bool is_all_incorrect() const {
        for (const auto& r : rollouts)
            if (r.correct) return false;
        return !rollouts.empty();
    }
};

// Most recent answer-class token in a thinking prefix; nullopt if none.
std::optional<TokenId> answer_of(std::span<const TokenId> prefix, const Vocab& vocab);

// K*: the smallest k with answer_of(tokens[0..k]) == y*; nullopt when no
// thinking prefix attains the target.
std::optional<int> nrp_oracle(std::span<const TokenId> thinking, const Vocab& vocab,
                              TokenId target);

// Next-token distribution during the thinking phase: eos masked out.
std::vector<double> thinking_dist(const TabularPolicy& policy, const Context& ctx,
                                  const Vocab& vocab);
// Answer-phase distribution: masked to answer tokens.
std::vector<double> answer_dist(const TabularPolicy& policy, const Context& ctx,
                                const Vocab& vocab);

// Episode protocol: autoregressive thinking until think_end, then exactly one
// answer token and eos. Hitting max_len before the answer phase completes
// marks the rollout truncated and incorrect.
Rollout generate_rollout(const TabularPolicy& policy, const Vocab& vocab, const Prompt& prompt,
                         int max_len, RngStream& rng);

struct EnvConfig {
    int classes = 2;
    int n_answer = 2;
    int n_high = 1;
    int n_filler = 1;
    int context_order = 2;
    int t_max = 48;
    std::vector<double> difficulty_mix = {0.5, 0.5};
    std::vector<double> difficulty = {0.2, 0.6};
    double init_bias_answer = 1.6;    // logit bonus on y*, scaled by (1 - difficulty)
    double init_bias_think_end = -1.0;
};

class SynthEnv {
public:
    explicit SynthEnv(EnvConfig cfg);

    const Vocab& vocab() const { return vocab_; }
    const EnvConfig& config() const { return cfg_; }

    Prompt prompt_for_class(int cls) const;
    Prompt sample_prompt(RngStream& rng) const;
    Prompt sample_prompt(std::span<const double> mix, RngStream& rng) const;

    // Cold-start policy realizing the per-class difficulty bias: every context
    // of length <= order gets the class bias row.
    TabularPolicy make_initial_policy(double learning_rate) const;

    Rollout rollout(const TabularPolicy& policy, const Prompt& prompt, RngStream& rng) const {
        return generate_rollout(policy, vocab_, prompt, cfg_.t_max, rng);
    }

private:
    EnvConfig cfg_;
    Vocab vocab_;
};

}  // namespace decs
