#include "decs/enumerate.hpp"

#include <stdexcept>

namespace decs {

namespace {

struct EnumState {
    const TabularPolicy& policy;
    const Vocab& vocab;
    const Prompt& prompt;
    int max_len;
    long guard;
    long leaves = 0;
    std::vector<WeightedRollout> out;

    void finish(std::vector<TokenId> tokens, std::optional<int> think_end_pos,
                std::optional<TokenId> final_answer, bool truncated, double prob) {
        if (++leaves > guard) throw std::runtime_error("enumeration guard exceeded");
        Rollout r;
        r.tokens = std::move(tokens);
        r.think_end_pos = think_end_pos;
        r.final_answer = final_answer;
        r.truncated = truncated;
        r.correct = !truncated && final_answer && *final_answer == prompt.target_answer;
        auto think = r.thinking_tokens();
        r.nrp_end = nrp_oracle(think, vocab, prompt.target_answer);
        out.push_back({std::move(r), prob});
    }

    void think(std::vector<TokenId>& tokens, const Context& ctx, double prob) {
        if (static_cast<int>(tokens.size()) >= max_len) {
            finish(tokens, std::nullopt, std::nullopt, true, prob);
            return;
        }
        auto p = thinking_dist(policy, ctx, vocab);
        for (int tok = 0; tok < static_cast<int>(p.size()); ++tok) {
            if (p[tok] <= 0.0) continue;
            tokens.push_back(tok);
            const double branch = prob * p[tok];
            if (tok == vocab.think_end) {
                const int te_pos = static_cast<int>(tokens.size());
                if (te_pos + 2 > max_len) {
                    finish(tokens, te_pos, std::nullopt, true, branch);
                } else {
                    const Context actx = ctx.advanced(tok, policy.context_order());
                    auto pa = answer_dist(policy, actx, vocab);
                    for (int ans = 0; ans < static_cast<int>(pa.size()); ++ans) {
                        if (pa[ans] <= 0.0) continue;
                        tokens.push_back(ans);
                        tokens.push_back(vocab.eos);
                        finish(tokens, te_pos, ans, false, branch * pa[ans]);
                        tokens.pop_back();
                        tokens.pop_back();
                    }
                }
            } else {
                Context next = ctx.advanced(tok, policy.context_order());
                think(tokens, next, branch);
            }
            tokens.pop_back();
        }
    }
};

}  // namespace

std::vector<WeightedRollout> enumerate_rollouts(const TabularPolicy& policy, const Vocab& vocab,
                                                const Prompt& prompt, int max_len, long guard) {
    if (max_len < 3) throw std::invalid_argument("max_len must be >= 3");
    EnumState st{policy, vocab, prompt, max_len, guard};
    std::vector<TokenId> tokens;
    st.think(tokens, Context{prompt.prompt_class, {}}, 1.0);
    return std::move(st.out);
}

double prefix_probability(const TabularPolicy& policy, const Vocab& vocab, const Prompt& prompt,
                          const Rollout& rollout, int prefix_len) {
    double prob = 1.0;
    Context ctx{prompt.prompt_class, {}};
    for (int pos = 1; pos <= prefix_len; ++pos) {
        const TokenId tok = rollout.tokens[pos - 1];
        const bool after_think_end = rollout.think_end_pos && pos > *rollout.think_end_pos;
        if (tok == vocab.eos && after_think_end) {
            // eos is appended deterministically after the answer token
        } else if (after_think_end) {
            prob *= answer_dist(policy, ctx, vocab)[tok];
        } else {
            prob *= thinking_dist(policy, ctx, vocab)[tok];
        }
        ctx = ctx.advanced(tok, policy.context_order());
    }
    return prob;
}

}  // namespace decs
