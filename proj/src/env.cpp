#include "decs/env.hpp"

#include <cmath>
#include <stdexcept>

namespace decs {

std::optional<TokenId> answer_of(std::span<const TokenId> prefix, const Vocab& vocab) {
    for (size_t i = prefix.size(); i-- > 0;)
        if (vocab.is_answer(prefix[i])) return prefix[i];
    return std::nullopt;
}

std::optional<int> nrp_oracle(std::span<const TokenId> thinking, const Vocab& vocab,
                              TokenId target) {
    for (size_t k = 1; k <= thinking.size(); ++k) {
        auto ans = answer_of(thinking.subspan(0, k), vocab);
        if (ans && *ans == target) return static_cast<int>(k);
    }
    return std::nullopt;
}

std::vector<double> thinking_dist(const TabularPolicy& policy, const Context& ctx,
                                  const Vocab& vocab) {
    auto p = policy.next_dist(ctx);
    p[vocab.eos] = 0.0;
    double sum = 0.0;
    for (double pi : p) sum += pi;
    for (double& pi : p) pi /= sum;
    return p;
}

std::vector<double> answer_dist(const TabularPolicy& policy, const Context& ctx,
                                const Vocab& vocab) {
    auto p = policy.next_dist(ctx);
    double sum = 0.0;
    for (int t = 0; t < static_cast<int>(p.size()); ++t) {
        if (!vocab.is_answer(t)) p[t] = 0.0;
        sum += p[t];
    }
    for (double& pi : p) pi /= sum;
    return p;
}

Rollout generate_rollout(const TabularPolicy& policy, const Vocab& vocab, const Prompt& prompt,
                         int max_len, RngStream& rng) {
    if (max_len < 3) throw std::invalid_argument("max_len must be >= 3");
    Rollout r;
    Context ctx{prompt.prompt_class, {}};
    const int order = policy.context_order();

    while (true) {
        if (r.length() >= max_len) {
            r.truncated = true;
            break;
        }
        auto p = thinking_dist(policy, ctx, vocab);
        TokenId tok = rng.categorical(p);
        r.tokens.push_back(tok);
        ctx = ctx.advanced(tok, order);
        if (tok == vocab.think_end) {
            r.think_end_pos = r.length();
            if (r.length() + 2 > max_len) {
                r.truncated = true;
                break;
            }
            auto pa = answer_dist(policy, ctx, vocab);
            TokenId ans = rng.categorical(pa);
            r.tokens.push_back(ans);
            r.final_answer = ans;
            ctx = ctx.advanced(ans, order);
            r.tokens.push_back(vocab.eos);
            break;
        }
    }

    r.correct = !r.truncated && r.final_answer && *r.final_answer == prompt.target_answer;
    auto think = r.thinking_tokens();
    r.nrp_end = nrp_oracle(think, vocab, prompt.target_answer);
    return r;
}

SynthEnv::SynthEnv(EnvConfig cfg)
    : cfg_(std::move(cfg)), vocab_(Vocab::make(cfg_.n_answer, cfg_.n_high, cfg_.n_filler)) {
    if (cfg_.classes < 1) throw std::invalid_argument("need at least one prompt class");
    if (static_cast<int>(cfg_.difficulty.size()) != cfg_.classes)
        throw std::invalid_argument("difficulty list must have one entry per class");
    if (static_cast<int>(cfg_.difficulty_mix.size()) != cfg_.classes)
        throw std::invalid_argument("difficulty_mix must have one entry per class");
    for (double d : cfg_.difficulty)
        if (d < 0.0 || d > 1.0) throw std::invalid_argument("difficulty outside [0,1]");
}

Prompt SynthEnv::prompt_for_class(int cls) const {
    if (cls < 0 || cls >= cfg_.classes) throw std::invalid_argument("bad prompt class");
    Prompt p;
    p.prompt_class = cls;
    p.target_answer = vocab_.answer_tokens[cls % vocab_.answer_tokens.size()];
    p.difficulty = cfg_.difficulty[cls];
    return p;
}

Prompt SynthEnv::sample_prompt(RngStream& rng) const {
    return sample_prompt(cfg_.difficulty_mix, rng);
}

Prompt SynthEnv::sample_prompt(std::span<const double> mix, RngStream& rng) const {
    if (mix.empty()) throw std::invalid_argument("empty difficulty mix");
    double sum = 0.0;
    for (double m : mix) sum += m;
    if (sum <= 0.0) throw std::invalid_argument("difficulty mix must have positive mass");
    std::vector<double> norm(mix.begin(), mix.end());
    for (double& m : norm) m /= sum;
    return prompt_for_class(rng.categorical(norm));
}

TabularPolicy SynthEnv::make_initial_policy(double learning_rate) const {
    TabularPolicy policy(vocab_.size(), cfg_.context_order, learning_rate);
    const int v = vocab_.size();

    for (int cls = 0; cls < cfg_.classes; ++cls) {
        Prompt p = prompt_for_class(cls);
        std::vector<double> bias(v, 0.0);
        bias[p.target_answer] = cfg_.init_bias_answer * (1.0 - p.difficulty);
        bias[vocab_.think_end] = cfg_.init_bias_think_end;

        // Populate every reachable suffix up to the context order.
        std::vector<std::vector<TokenId>> suffixes = {{}};
        for (int len = 0; len < cfg_.context_order; ++len) {
            std::vector<std::vector<TokenId>> next;
            for (const auto& s : suffixes)
                if (static_cast<int>(s.size()) == len)
                    for (TokenId t = 0; t < v; ++t) {
                        auto ext = s;
                        ext.push_back(t);
                        next.push_back(ext);
                    }
            suffixes.insert(suffixes.end(), next.begin(), next.end());
        }
        for (const auto& s : suffixes) policy.set_logits(Context{cls, s}, bias);
    }
    return policy;
}

}  // namespace decs
