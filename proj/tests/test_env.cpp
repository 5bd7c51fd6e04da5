#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "decs/env.hpp"

using namespace decs;

namespace {

const Vocab kV = Vocab::make(2, 1, 1);  // A0 A1 H0 F0 te eos

// force the policy to emit exactly this token from the given context
void force(TabularPolicy& policy, const Context& ctx, TokenId tok) {
    std::vector<double> row(kV.size(), 0.0);
    row[tok] = 1e9;
    policy.set_logits(ctx, row);
}

// brute-force K*: try every prefix length and re-derive Answer() by scanning
std::optional<int> kstar_brute(const std::vector<TokenId>& thinking, TokenId target) {
    for (int k = 1; k <= static_cast<int>(thinking.size()); ++k) {
        std::optional<TokenId> ans;
        for (int i = 0; i < k; ++i)
            if (kV.is_answer(thinking[i])) ans = thinking[i];
        if (ans && *ans == target) return k;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("answer_of: most recent answer token") {
    const TokenId a0 = kV.answer_tokens[0], a1 = kV.answer_tokens[1];
    const TokenId h0 = kV.high_entropy_tokens[0], f0 = kV.filler_tokens[0];
    std::vector<TokenId> none = {h0, f0};
    CHECK(!answer_of(none, kV));
    std::vector<TokenId> two = {a0, h0, a1};
    CHECK(answer_of(two, kV) == a1);
    std::vector<TokenId> one = {a1};
    CHECK(answer_of(one, kV) == a1);
}

TEST_CASE("nrp_oracle: literal examples") {
    const TokenId a0 = kV.answer_tokens[0], a1 = kV.answer_tokens[1];
    const TokenId h0 = kV.high_entropy_tokens[0];
    std::vector<TokenId> t1 = {a1, h0, a1};
    CHECK(nrp_oracle(t1, kV, a1) == 1);
    std::vector<TokenId> t2 = {a0, a0};
    CHECK(!nrp_oracle(t2, kV, a1));
    std::vector<TokenId> t3 = {h0, a1};
    CHECK(nrp_oracle(t3, kV, a1) == 2);
}

TEST_CASE("nrp_oracle agrees with brute force on random sequences up to 64") {
    RngStream rng(31);
    const std::vector<TokenId> thinkable = {kV.answer_tokens[0], kV.answer_tokens[1],
                                            kV.high_entropy_tokens[0], kV.filler_tokens[0]};
    for (int t = 0; t < 300; ++t) {
        const int len = static_cast<int>(rng.next_u64() % 65);
        std::vector<TokenId> thinking(len);
        for (auto& tok : thinking) tok = thinkable[rng.next_u64() % thinkable.size()];
        const TokenId target = kV.answer_tokens[rng.next_u64() % 2];
        CHECK(nrp_oracle(thinking, kV, target) == kstar_brute(thinking, target));
    }
}

TEST_CASE("nrp minimality: strict prefixes below K* never attain the target") {
    RngStream rng(32);
    const std::vector<TokenId> thinkable = {kV.answer_tokens[0], kV.answer_tokens[1],
                                            kV.high_entropy_tokens[0], kV.filler_tokens[0]};
    for (int t = 0; t < 200; ++t) {
        const int len = 1 + static_cast<int>(rng.next_u64() % 32);
        std::vector<TokenId> thinking(len);
        for (auto& tok : thinking) tok = thinkable[rng.next_u64() % thinkable.size()];
        const TokenId target = kV.answer_tokens[0];
        const auto k = nrp_oracle(thinking, kV, target);
        if (!k) continue;
        for (int p = 1; p < *k; ++p) {
            std::span<const TokenId> prefix(thinking.data(), p);
            const auto a = answer_of(prefix, kV);
            CHECK((!a || *a != target));
        }
    }
}

TEST_CASE("generate_rollout: forced [A1, te, A1, eos] trace") {
    const TokenId a1 = kV.answer_tokens[1], te = kV.think_end;
    TabularPolicy policy(kV.size(), 2, 0.1);
    force(policy, {0, {}}, a1);
    force(policy, {0, {a1}}, te);
    force(policy, {0, {a1, te}}, a1);
    Prompt prompt{0, a1, 0.0};
    RngStream rng(1);
    const Rollout r = generate_rollout(policy, kV, prompt, 48, rng);
    CHECK(r.tokens == std::vector<TokenId>({a1, te, a1, kV.eos}));
    CHECK(r.correct);
    CHECK(r.nrp_end == 1);
    CHECK(r.length() == 4);
    CHECK(r.thinking_len() == 1);
    CHECK(r.think_end_pos == 2);
}

TEST_CASE("generate_rollout: immediate think_end then wrong answer") {
    const TokenId a0 = kV.answer_tokens[0], a1 = kV.answer_tokens[1], te = kV.think_end;
    TabularPolicy policy(kV.size(), 2, 0.1);
    force(policy, {0, {}}, te);
    force(policy, {0, {te}}, a0);
    Prompt prompt{0, a1, 0.0};
    RngStream rng(1);
    const Rollout r = generate_rollout(policy, kV, prompt, 48, rng);
    CHECK(!r.correct);
    CHECK(!r.nrp_end);
    CHECK(r.final_answer == a0);
    CHECK(r.thinking_len() == 0);
}

TEST_CASE("generate_rollout: truncation before think_end") {
    const TokenId f0 = kV.filler_tokens[0];
    TabularPolicy policy(kV.size(), 2, 0.1);
    // always emit filler: never reaches the answer phase
    force(policy, {0, {}}, f0);
    force(policy, {0, {f0}}, f0);
    force(policy, {0, {f0, f0}}, f0);
    Prompt prompt{0, kV.answer_tokens[0], 0.0};
    RngStream rng(1);
    const Rollout r = generate_rollout(policy, kV, prompt, 10, rng);
    CHECK(r.truncated);
    CHECK(!r.correct);
    CHECK(!r.final_answer);
    CHECK(r.length() <= 10);
}

TEST_CASE("generate_rollout: seeded determinism") {
    SynthEnv env{EnvConfig{}};
    const TabularPolicy policy = env.make_initial_policy(0.1);
    const Prompt prompt = env.prompt_for_class(0);
    RngStream a(77), b(77);
    for (int i = 0; i < 20; ++i) {
        const Rollout ra = env.rollout(policy, prompt, a);
        const Rollout rb = env.rollout(policy, prompt, b);
        CHECK(ra.tokens == rb.tokens);
    }
}

TEST_CASE("redundant tokens are exactly the thinking complement of the NRP") {
    SynthEnv env{EnvConfig{}};
    const TabularPolicy policy = env.make_initial_policy(0.1);
    RngStream rng(55);
    for (int i = 0; i < 200; ++i) {
        const Prompt prompt = env.sample_prompt(rng);
        const Rollout r = env.rollout(policy, prompt, rng);
        if (!r.nrp_end) continue;
        CHECK(*r.nrp_end >= 1);
        CHECK(*r.nrp_end <= r.thinking_len());
        // every thinking index is either <= K* (in the NRP) or > K* (redundant)
        const int redundant = r.thinking_len() - *r.nrp_end;
        CHECK(redundant == r.thinking_len() - *r.nrp_end);
    }
}

TEST_CASE("thinking_dist masks eos, answer_dist masks to answers") {
    SynthEnv env{EnvConfig{}};
    const TabularPolicy policy = env.make_initial_policy(0.1);
    const Context ctx{0, {}};
    const auto td = thinking_dist(policy, ctx, env.vocab());
    CHECK(td[env.vocab().eos] == 0.0);
    double sum = 0.0;
    for (double p : td) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    const auto ad = answer_dist(policy, ctx, env.vocab());
    sum = 0.0;
    for (TokenId t = 0; t < env.vocab().size(); ++t) {
        if (!env.vocab().is_answer(t)) CHECK(ad[t] == 0.0);
        sum += ad[t];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sample_prompt: point mass and 3-sigma frequencies") {
    SynthEnv env{EnvConfig{}};
    RngStream rng(9);
    const std::vector<double> point = {1.0, 0.0};
    for (int i = 0; i < 50; ++i) CHECK(env.sample_prompt(point, rng).prompt_class == 0);

    const std::vector<double> mix = {0.5, 0.5};
    const int n = 10000;
    int c0 = 0;
    for (int i = 0; i < n; ++i) c0 += env.sample_prompt(mix, rng).prompt_class == 0 ? 1 : 0;
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(c0 - n * 0.5) <= 3 * sigma);
}

TEST_CASE("sample_prompt: identical seeds give identical prompt streams") {
    SynthEnv env{EnvConfig{}};
    RngStream a(4), b(4);
    for (int i = 0; i < 100; ++i) {
        const Prompt pa = env.sample_prompt(a);
        const Prompt pb = env.sample_prompt(b);
        CHECK(pa.prompt_class == pb.prompt_class);
        CHECK(pa.target_answer == pb.target_answer);
    }
}

TEST_CASE("sample_prompt rejects an empty mix") {
    SynthEnv env{EnvConfig{}};
    RngStream rng(1);
    CHECK_THROWS(env.sample_prompt(std::vector<double>{}, rng));
}

TEST_CASE("prompt_for_class carries the configured difficulty") {
    EnvConfig cfg;
    cfg.difficulty = {0.2, 0.6};
    SynthEnv env{cfg};
    CHECK(env.prompt_for_class(0).difficulty == 0.2);
    CHECK(env.prompt_for_class(1).difficulty == 0.6);
    CHECK(env.vocab().is_answer(env.prompt_for_class(1).target_answer));
}
