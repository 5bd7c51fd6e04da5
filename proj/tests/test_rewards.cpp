#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "decs/probes.hpp"
#include "decs/rewards.hpp"

using namespace decs;

namespace {

const Vocab kV = Vocab::make(2, 1, 1);
const TokenId kA0 = kV.answer_tokens[0];
const TokenId kA1 = kV.answer_tokens[1];
const TokenId kH0 = kV.high_entropy_tokens[0];
const TokenId kF0 = kV.filler_tokens[0];
const TokenId kTe = kV.think_end;
const TokenId kEos = kV.eos;

Rollout make(std::vector<TokenId> toks, TokenId target = kA0) {
    return annotate_rollout(std::move(toks), kV, target);
}

}  // namespace

TEST_CASE("correctness_reward") {
    CHECK(correctness_reward(make({kA0, kTe, kA0, kEos})) == 1.0);
    CHECK(correctness_reward(make({kA0, kTe, kA1, kEos})) == 0.0);
    Rollout truncated = make({kF0, kF0});
    CHECK(truncated.truncated);
    CHECK(correctness_reward(truncated) == 0.0);
}

TEST_CASE("length_reward examples") {
    Rollout r = make({kA0, kTe, kA0, kEos});
    r.tokens.assign(1000, kF0);  // length drives the formula; flags already set
    CHECK(length_reward(r, 0.001) == doctest::Approx(1.0 - 0.001 * 1000).epsilon(1e-12));
    Rollout wrong = make({kA0, kTe, kA1, kEos});
    CHECK(length_reward(wrong, 0.001) == 0.0);
    Rollout c = make({kA0, kTe, kA0, kEos});
    CHECK(length_reward(c, 0.0) == correctness_reward(c));
}

TEST_CASE("length_reward strictly decreasing in L for correct rollouts") {
    double prev = 1e9;
    for (int len = 4; len < 40; ++len) {
        Rollout r = make({kA0, kTe, kA0, kEos});
        r.tokens.resize(len, kF0);
        const double v = length_reward(r, 0.01);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("decoupled_rewards: literal branch values") {
    // correct rollout, L=10, K*=2: [F0 A0 F0 F0 F0 F0 F0 te A0 eos]
    Rollout r = make({kF0, kA0, kF0, kF0, kF0, kF0, kF0, kTe, kA0, kEos});
    REQUIRE(r.correct);
    REQUIRE(r.nrp_end == 2);
    Rollout shorter = make({kA0, kTe, kA0, kEos});
    RolloutGroup group{{0, kA0, 0.0}, {r, shorter}};
    RewardParams params;  // 1.1 / 1.0
    const auto m = decoupled_rewards(group, {r.nrp_end, shorter.nrp_end}, params);

    CHECK(m.rows() == 2);
    CHECK(m.cols() == 10);
    // NRP positions j <= K*
    CHECK(m.values[0][0] == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(m.values[0][1] == doctest::Approx(1.1).epsilon(1e-12));
    // redundant thinking position: r_zero + (r_plus - r_zero)/L = 1.01
    for (int j = 2; j < 7; ++j)
        CHECK(m.values[0][j] == doctest::Approx(1.01).epsilon(1e-12));
    // outside thinking: think_end, answer, eos all protected
    for (int j = 7; j < 10; ++j)
        CHECK(m.values[0][j] == doctest::Approx(1.1).epsilon(1e-12));
    // padding of the shorter correct rollout
    for (int j = 4; j < 10; ++j) {
        CHECK(m.is_pad(1, j));
        CHECK(m.values[1][j] == doctest::Approx(1.1).epsilon(1e-12));
    }
}

TEST_CASE("decoupled_rewards: incorrect rollout is zero everywhere, pads included") {
    Rollout good = make({kA0, kTe, kA0, kEos});
    Rollout bad = make({kA1, kF0, kF0, kTe, kA1, kEos});
    RolloutGroup group{{0, kA0, 0.0}, {good, bad}};
    const auto m = decoupled_rewards(group, {good.nrp_end, std::nullopt}, RewardParams{});
    for (int j = 0; j < m.cols(); ++j) CHECK(m.values[1][j] == 0.0);
}

TEST_CASE("decoupled_rewards: correct rollout with null K* aborts the group") {
    Rollout good = make({kA0, kTe, kA0, kEos});
    RolloutGroup group{{0, kA0, 0.0}, {good, good}};
    CHECK_THROWS(decoupled_rewards(group, {good.nrp_end, std::nullopt}, RewardParams{}));
}

TEST_CASE("decoupled_rewards: redundancy gap grows with L") {
    RewardParams params;
    double prev_gap = 0.0;
    for (int len = 6; len <= 30; len += 6) {
        std::vector<TokenId> toks = {kA0};
        while (static_cast<int>(toks.size()) < len - 3) toks.push_back(kF0);
        toks.push_back(kTe);
        toks.push_back(kA0);
        toks.push_back(kEos);
        Rollout r = make(toks);
        REQUIRE(r.correct);
        RolloutGroup group{{0, kA0, 0.0}, {r, r}};
        const auto m = decoupled_rewards(group, {r.nrp_end, r.nrp_end}, params);
        const double redundant = m.values[0][1];
        CHECK(redundant > params.r_zero);
        CHECK(redundant < params.r_plus);
        const double gap = params.r_plus - redundant;
        CHECK(gap > prev_gap);
        prev_gap = gap;
    }
}

TEST_CASE("decoupled_rewards: thinking-length denominator switch") {
    // L=10, thinking length 7
    Rollout r = make({kF0, kA0, kF0, kF0, kF0, kF0, kF0, kTe, kA0, kEos});
    RolloutGroup group{{0, kA0, 0.0}, {r, r}};
    RewardParams params;
    params.l_is_thinking = true;
    const auto m = decoupled_rewards(group, {r.nrp_end, r.nrp_end}, params);
    CHECK(m.values[0][3] == doctest::Approx(1.0 + 0.1 / 7.0).epsilon(1e-12));
}

TEST_CASE("reward params validation") {
    RewardParams bad;
    bad.r_plus = 0.9;  // must exceed r_zero
    CHECK_THROWS(bad.validate());
    bad = RewardParams{};
    bad.gamma = -0.1;
    CHECK_THROWS(bad.validate());
    CHECK_NOTHROW(RewardParams{}.validate());
}
