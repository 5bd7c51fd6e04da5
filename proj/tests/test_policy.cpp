#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "decs/policy.hpp"

using namespace decs;

namespace {

// independent softmax oracle: plain exp / normalize
std::vector<double> softmax_oracle(const std::vector<double>& z) {
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i]));
    for (double& x : p) x /= sum;
    return p;
}

}  // namespace

TEST_CASE("next_dist: uniform on missing rows") {
    TabularPolicy policy(4, 2, 0.1);
    const auto p = policy.next_dist({0, {}});
    for (double x : p) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("next_dist: hand softmax ln3 row") {
    TabularPolicy policy(4, 2, 0.1);
    policy.set_logits({0, {}}, {std::log(3.0), 0.0, 0.0, 0.0});
    const auto p = policy.next_dist({0, {}});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    for (int i = 1; i < 4; ++i) CHECK(p[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("next_dist: saturation") {
    TabularPolicy policy(3, 1, 0.1);
    policy.set_logits({0, {}}, {1e6, 0.0, 0.0});
    CHECK(policy.next_dist({0, {}})[0] >= 1.0 - 1e-9);
}

TEST_CASE("next_dist: matches exp/normalize oracle on random rows") {
    RngStream rng(42);
    for (int t = 0; t < 50; ++t) {
        TabularPolicy policy(5, 1, 0.1);
        std::vector<double> z(5);
        for (double& x : z) x = 10.0 * rng.uniform() - 5.0;
        policy.set_logits({0, {}}, z);
        const auto p = policy.next_dist({0, {}});
        const auto q = softmax_oracle(z);
        double sum = 0.0;
        for (int i = 0; i < 5; ++i) {
            CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
            sum += p[i];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("logit translation invariance") {
    TabularPolicy a(4, 1, 0.1), b(4, 1, 0.1);
    a.set_logits({0, {}}, {0.3, -1.2, 2.0, 0.0});
    b.set_logits({0, {}}, {0.3 + 7.5, -1.2 + 7.5, 2.0 + 7.5, 0.0 + 7.5});
    const auto pa = a.next_dist({0, {}});
    const auto pb = b.next_dist({0, {}});
    for (int i = 0; i < 4; ++i) CHECK(std::abs(pa[i] - pb[i]) <= 1e-12);
}

TEST_CASE("sample_token: deterministic row always returns its token") {
    TabularPolicy policy(4, 1, 0.1);
    policy.set_logits({0, {}}, {0.0, 1e9, 0.0, 0.0});
    RngStream rng(7);
    for (int i = 0; i < 100; ++i) CHECK(policy.sample_token({0, {}}, rng) == 1);
}

TEST_CASE("sample_token: uniform frequencies within 3 sigma") {
    TabularPolicy policy(4, 1, 0.1);
    RngStream rng(123);
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) ++counts[policy.sample_token({0, {}}, rng)];
    const double p = 0.25;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - n * p) <= 3 * sigma);
}

TEST_CASE("sample_token: identical seeds give identical streams") {
    TabularPolicy policy(6, 1, 0.1);
    policy.set_logits({0, {}}, {0.5, -0.5, 1.0, 0.0, -1.0, 0.2});
    RngStream a(99), b(99);
    for (int i = 0; i < 200; ++i)
        CHECK(policy.sample_token({0, {}}, a) == policy.sample_token({0, {}}, b));
}

TEST_CASE("pg_update_exact: zero advantages leave logits unchanged") {
    TabularPolicy policy(3, 1, 0.5);
    policy.set_logits({0, {}}, {0.1, 0.2, 0.3});
    TokenAdvantageMap adv;
    adv[{0, {}}] = {0.0, 0.0, 0.0};
    policy.pg_update_exact(adv);
    const auto& z = policy.logits({0, {}});
    CHECK(z[0] == 0.1);
    CHECK(z[1] == 0.2);
    CHECK(z[2] == 0.3);
}

TEST_CASE("pg_update_exact: two-token half/half row") {
    TabularPolicy policy(2, 1, 0.1);
    policy.set_logits({0, {}}, {0.0, 0.0});
    TokenAdvantageMap adv;
    adv[{0, {}}] = {1.0, -1.0};
    policy.pg_update_exact(adv);
    const auto& z = policy.logits({0, {}});
    CHECK(z[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("pg_update_exact: three-token uniform row") {
    TabularPolicy policy(3, 1, 0.01);
    TokenAdvantageMap adv;
    adv[{0, {}}] = {2.0, -1.0, -1.0};
    policy.pg_update_exact(adv);
    const auto& z = policy.logits({0, {}});
    CHECK(z[0] == doctest::Approx(1.0 / 150.0).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(-1.0 / 300.0).epsilon(1e-12));
    CHECK(z[2] == doctest::Approx(-1.0 / 300.0).epsilon(1e-12));
}

TEST_CASE("pg_update_exact: rejects uncentered and non-finite advantages") {
    TabularPolicy policy(2, 1, 0.1);
    TokenAdvantageMap adv;
    adv[{0, {}}] = {1.0, 1.0};  // pi-mean 1, not centered
    CHECK_THROWS(policy.pg_update_exact(adv));
    adv[{0, {}}] = {std::numeric_limits<double>::quiet_NaN(), 0.0};
    CHECK_THROWS(policy.pg_update_exact(adv));
}

TEST_CASE("pg_update_exact: lemma identity on randomized centered instances") {
    RngStream rng(2024);
    for (int t = 0; t < 100; ++t) {
        const int v = 2 + static_cast<int>(rng.next_u64() % 6);
        TabularPolicy policy(v, 1, 0.3);
        std::vector<double> z(v);
        for (double& x : z) x = 4.0 * rng.uniform() - 2.0;
        Context ctx{0, {}};
        policy.set_logits(ctx, z);
        const auto pi = policy.next_dist(ctx);
        std::vector<double> a(v);
        double bar = 0.0;
        for (int i = 0; i < v; ++i) bar += pi[i] * (a[i] = 2.0 * rng.uniform() - 1.0);
        for (double& x : a) x -= bar;
        TokenAdvantageMap adv;
        adv[ctx] = a;
        policy.pg_update_exact(adv);
        const auto& znew = policy.logits(ctx);
        for (int i = 0; i < v; ++i)
            CHECK(std::abs((znew[i] - z[i]) - 0.3 * pi[i] * a[i]) <= 1e-10);
    }
}

TEST_CASE("ppo_update: ratio 1 equals the sample policy-gradient step") {
    TabularPolicy policy(3, 1, 0.2);
    Context ctx{0, {}};
    policy.set_logits(ctx, {0.4, -0.1, 0.0});
    const auto pi = policy.next_dist(ctx);

    TabularPolicy ref = policy;
    std::vector<PpoSample> batch = {{ctx, 1, 0.8, pi[1]}};
    policy.ppo_update(batch, 0.2);

    // sample-level score-function gradient of rho*A at rho = 1:
    // d/dz_b = A * (delta_{tb} - pi_b)
    const auto& before = ref.logits(ctx);
    const auto& after = policy.logits(ctx);
    for (int b = 0; b < 3; ++b) {
        const double grad = 0.8 * ((b == 1 ? 1.0 : 0.0) - pi[b]);
        CHECK(after[b] - before[b] == doctest::Approx(0.2 * grad).epsilon(1e-10));
    }
}

TEST_CASE("ppo_update: clipped-out samples contribute nothing") {
    // positive advantage, ratio above 1 + eps
    TabularPolicy policy(3, 1, 0.2);
    Context ctx{0, {}};
    policy.set_logits(ctx, {0.0, 0.0, 0.0});
    const double pi1 = policy.next_dist(ctx)[1];
    std::vector<PpoSample> batch = {{ctx, 1, 1.0, pi1 / 1.5}};  // ratio = 1.5
    policy.ppo_update(batch, 0.2);
    const auto& z = policy.logits(ctx);
    for (double x : z) CHECK(x == 0.0);
}

TEST_CASE("ppo_update: negative advantage at ratio 0.5 is clipped out") {
    // rho*A = -0.5 > (1-eps)*A = -0.8, so min picks the clipped constant term
    TabularPolicy policy(3, 1, 0.2);
    Context ctx{0, {}};
    const auto pi = policy.next_dist(ctx);
    std::vector<PpoSample> low = {{ctx, 1, -1.0, pi[1] / 0.5}};
    TabularPolicy frozen = policy;
    frozen.ppo_update(low, 0.2);
    CHECK(frozen == policy);
}

TEST_CASE("ppo_update: negative advantage at ratio 1.5 uses the unclipped branch") {
    TabularPolicy policy(3, 1, 0.2);
    Context ctx{0, {}};
    const auto pi = policy.next_dist(ctx);
    const double old_prob = pi[1] / 1.5;  // ratio = 1.5 > 1 + eps, A < 0: min picks rho*A
    std::vector<PpoSample> batch = {{ctx, 1, -1.0, old_prob}};
    TabularPolicy ref = policy;
    policy.ppo_update(batch, 0.2);
    const auto& before = ref.logits(ctx);
    const auto& after = policy.logits(ctx);
    bool moved = false;
    for (int b = 0; b < 3; ++b) {
        const double grad = (-1.0) / old_prob * pi[1] * ((b == 1 ? 1.0 : 0.0) - pi[b]);
        CHECK(after[b] - before[b] == doctest::Approx(0.2 * grad).epsilon(1e-10));
        if (std::abs(after[b] - before[b]) > 1e-12) moved = true;
    }
    CHECK(moved);
}

TEST_CASE("ppo_update: rejects empty batch and bad epsilon") {
    TabularPolicy policy(3, 1, 0.2);
    CHECK_THROWS(policy.ppo_update({}, 0.2));
    std::vector<PpoSample> batch = {{{0, {}}, 0, 1.0, 0.5}};
    CHECK_THROWS(policy.ppo_update(batch, 0.0));
    CHECK_THROWS(policy.ppo_update(batch, -0.1));
}

TEST_CASE("row stochasticity after a sequence of updates") {
    TabularPolicy policy(4, 1, 0.5);
    Context ctx{0, {}};
    RngStream rng(5);
    for (int step = 0; step < 30; ++step) {
        const auto pi = policy.next_dist(ctx);
        std::vector<double> a(4);
        double bar = 0.0;
        for (int i = 0; i < 4; ++i) bar += pi[i] * (a[i] = rng.uniform() - 0.5);
        for (double& x : a) x -= bar;
        TokenAdvantageMap adv;
        adv[ctx] = a;
        policy.pg_update_exact(adv);
        double sum = 0.0;
        for (double p : policy.next_dist(ctx)) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("checkpoint round trip is exact") {
    TabularPolicy policy(5, 2, 0.1);
    RngStream rng(11);
    for (int k = 0; k < 10; ++k) {
        Context ctx{k % 2, {}};
        if (k >= 4) ctx.suffix = {k % 5, (k + 1) % 5};
        std::vector<double> z(5);
        for (double& x : z) x = 1e3 * (rng.uniform() - 0.5) / 3.0;  // non-round doubles
        policy.set_logits(ctx, z);
    }
    std::stringstream ss;
    policy.save(ss);
    const TabularPolicy back = TabularPolicy::load(ss, 0.1);
    CHECK(back == policy);
}

TEST_CASE("checkpoint header is versioned") {
    TabularPolicy policy(3, 1, 0.1);
    std::stringstream ss;
    policy.save(ss);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "decs-policy v1 vocab=3 order=1");
}
