#include "decs/probes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "decs/advantage.hpp"

namespace decs {

namespace {

constexpr double kLemma1Tol = 1e-10;

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

// Replay a rollout through the policy and accumulate the softmax mass of each
// realized high-entropy token: m = sum_j pi(o_j | o_<j) * 1[o_j high].
double high_entropy_mass(const TabularPolicy& policy, const Vocab& vocab, const Prompt& prompt,
                         const Rollout& rollout) {
    Context ctx{prompt.prompt_class, {}};
    double m = 0.0;
    for (TokenId tok : rollout.tokens) {
        if (vocab.is_high_entropy(tok)) {
            const auto dist = policy.next_dist(ctx);
            m += dist[tok];
        }
        ctx = ctx.advanced(tok, policy.context_order());
    }
    return m;
}

struct Support {
    std::vector<Rollout> rollouts;
    std::vector<double> probs;  // conditional on membership
    std::vector<double> lengths;
    std::vector<double> mass;  // high-entropy softmax mass per rollout
};

Support correct_support(const TabularPolicy& policy, const Vocab& vocab, const Prompt& prompt,
                        int t_max) {
    Support s;
    double total = 0.0;
    for (auto& wr : enumerate_rollouts(policy, vocab, prompt, t_max)) {
        if (!wr.rollout.correct) continue;
        total += wr.prob;
        s.probs.push_back(wr.prob);
        s.lengths.push_back(wr.rollout.length());
        s.mass.push_back(high_entropy_mass(policy, vocab, prompt, wr.rollout));
        s.rollouts.push_back(std::move(wr.rollout));
    }
    if (total <= 0.0) throw std::runtime_error("probe instance has no correct rollouts");
    for (double& p : s.probs) p /= total;
    return s;
}

double population_std(std::span<const double> xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

std::string ProbeReport::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["measured"] = measured;
    j["predicted"] = predicted;
    j["sample_size"] = sample_size;
    j["verdict"] = !applicable ? "not-applicable" : (pass ? "pass" : "fail");
    j["note"] = note;
    return j.dump();
}

std::string ProbeReport::to_table_row() const {
    std::ostringstream out;
    out << name << ": " << (!applicable ? "NOT-APPLICABLE" : (pass ? "PASS" : "FAIL"))
        << "  measured=" << fmt(measured) << "  predicted=" << predicted
        << "  n=" << sample_size;
    if (!note.empty()) out << "  (" << note << ")";
    return out.str();
}

Rollout annotate_rollout(std::vector<TokenId> tokens, const Vocab& vocab, TokenId target) {
    Rollout r;
    r.tokens = std::move(tokens);
    for (int i = 0; i < r.length(); ++i) {
        if (r.tokens[i] == vocab.think_end) {
            r.think_end_pos = i + 1;
            break;
        }
    }
    if (r.think_end_pos && *r.think_end_pos + 1 <= r.length()) {
        r.final_answer = r.tokens[*r.think_end_pos];
        r.correct = *r.final_answer == target;
    } else {
        r.truncated = true;
    }
    r.nrp_end = nrp_oracle(r.thinking_tokens(), vocab, target);
    return r;
}

ProbeReport probe_lemma1(uint64_t seed, int trials) {
    ProbeReport rep;
    rep.name = "lemma1";
    rep.predicted = "max |dz - eta*pi*A| <= 1e-10";
    rep.sample_size = trials;

    RngStream rng(mix_seed(seed, 0x1e11a1));
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int vocab = 3 + static_cast<int>(rng.next_u64() % 5);  // 3..7
        const double eta = 0.05 + 2.0 * rng.uniform();
        TabularPolicy policy(vocab, 1, eta);
        const int rows = 1 + static_cast<int>(rng.next_u64() % 4);
        TokenAdvantageMap adv;
        std::vector<Context> ctxs;
        std::vector<std::vector<double>> pis;
        for (int k = 0; k < rows; ++k) {
            Context ctx{k % 2, {}};
            if (k >= 2) ctx.suffix = {static_cast<TokenId>(k % vocab)};
            std::vector<double> logits(vocab);
            for (double& z : logits) z = 4.0 * rng.uniform() - 2.0;
            policy.set_logits(ctx, logits);

            const auto pi = policy.next_dist(ctx);
            std::vector<double> a(vocab);
            for (double& x : a) x = 2.0 * rng.uniform() - 1.0;
            // center under pi so the exact-update identity applies
            double bar = 0.0;
            for (int b = 0; b < vocab; ++b) bar += pi[b] * a[b];
            for (double& x : a) x -= bar;
            adv[ctx] = a;
            ctxs.push_back(ctx);
            pis.push_back(pi);
        }

        std::vector<std::vector<double>> before;
        for (const auto& ctx : ctxs) before.push_back(policy.logits(ctx));
        policy.pg_update_exact(adv);

        for (size_t k = 0; k < ctxs.size(); ++k) {
            const auto& after = policy.logits(ctxs[k]);
            // independent oracle: expected softmax policy gradient,
            // sum_a pi_a A_a (delta_ab - pi_b), reduced by centering
            const auto& pi = pis[k];
            const auto& a = adv.at(ctxs[k]);
            double bar = 0.0;
            for (size_t b = 0; b < pi.size(); ++b) bar += pi[b] * a[b];
            for (size_t b = 0; b < pi.size(); ++b) {
                const double grad = pi[b] * a[b] - pi[b] * bar;
                const double dz = after[b] - before[k][b];
                worst = std::max(worst, std::abs(dz - eta * grad));
            }
        }
    }
    rep.measured = worst;
    rep.pass = worst <= kLemma1Tol;
    return rep;
}

EasyGroupStats easy_group_expectation(const EasyGroupInstance& inst) {
    const Support s = correct_support(inst.policy, inst.vocab, inst.prompt, inst.t_max);
    const int n = static_cast<int>(s.rollouts.size());
    const int g = inst.group_size;
    if (g < 2) throw std::invalid_argument("group size must be >= 2");
    double leaves = 1.0;
    for (int k = 0; k < g; ++k) leaves *= n;
    if (leaves > 5e6) throw std::runtime_error("group tuple enumeration too large");

    EasyGroupStats stats;
    stats.degenerate = true;
    for (int i = 1; i < n; ++i)
        if (s.lengths[i] != s.lengths[0]) stats.degenerate = false;

    std::vector<int> idx(g, 0);
    std::vector<double> rewards(g), lens(g);
    while (true) {
        double w = 1.0;
        for (int k = 0; k < g; ++k) {
            w *= s.probs[idx[k]];
            lens[k] = s.lengths[idx[k]];
            rewards[k] = 1.0 - inst.gamma * s.lengths[idx[k]];
        }
        const auto adv = grpo_advantage(rewards);
        double q = 0.0;
        for (int k = 0; k < g; ++k) q += adv[k] * s.mass[idx[k]];
        stats.expected_change += w * q;
        stats.sigma_l += w * population_std(lens);
        ++stats.tuple_count;

        int k = g - 1;
        while (k >= 0 && ++idx[k] == n) idx[k--] = 0;
        if (k < 0) break;
    }
    return stats;
}

ProbeReport probe_lemma2(const EasyGroupInstance& inst) {
    const EasyGroupStats stats = easy_group_expectation(inst);
    ProbeReport rep;
    rep.name = "lemma2";
    rep.predicted = "E[high-entropy logit change] < 0";
    rep.measured = stats.expected_change;
    rep.sample_size = stats.tuple_count;
    rep.applicable = !stats.degenerate;
    rep.pass = rep.applicable && stats.expected_change < 0.0;
    if (stats.degenerate) rep.note = "no length variance in the correct support";
    return rep;
}

Theorem1Result probe_theorem1(const Theorem1Instance& inst) {
    Theorem1Result res;
    res.report.name = "theorem1";

    const EasyGroupStats easy = easy_group_expectation(inst.easy);
    res.sigma_l = easy.sigma_l;
    const int g = inst.easy.group_size;

    // expected per-group high-entropy logit change and the batch constant for
    // the shipped mixed groups
    double q_mixed = 0.0;
    double c_bar = 0.0;
    for (const auto& grp : inst.mixed) {
        const int gm = static_cast<int>(grp.rollouts.size());
        if (gm != g) throw std::invalid_argument("mixed group size must match the easy groups");
        std::vector<double> rewards(gm);
        int n_correct = 0;
        for (int i = 0; i < gm; ++i) {
            rewards[i] = length_reward(grp.rollouts[i], inst.gamma);
            n_correct += grp.rollouts[i].correct ? 1 : 0;
        }
        if (n_correct == 0 || n_correct == gm)
            throw std::invalid_argument("mixed groups need both correct and incorrect rollouts");
        const auto adv = grpo_advantage(rewards);
        const double a = static_cast<double>(n_correct) / gm;
        for (int i = 0; i < gm; ++i) {
            q_mixed += adv[i] *
                       high_entropy_mass(inst.mixed_policy, inst.easy.vocab, grp.prompt,
                                         grp.rollouts[i]);
            if (grp.rollouts[i].correct)
                c_bar += grp.rollouts[i].length() * (1.0 - a) / std::sqrt(a * (1.0 - a));
        }
    }
    const double m = static_cast<double>(inst.mixed.size());
    q_mixed /= m;
    c_bar /= m;

    // E(kappa): kappa*B easy groups plus (1-kappa)*B mixed groups
    const double b = inst.batch_size;
    bool found = false;
    for (int i = 0; i < inst.grid_points; ++i) {
        const double kappa = static_cast<double>(i) / (inst.grid_points - 1);
        const double e = b * (kappa * easy.expected_change + (1.0 - kappa) * q_mixed);
        res.kappa_grid.push_back(kappa);
        res.expected_change.push_back(e);
        if (!found && i > 0 && res.expected_change[i - 1] > 0.0 && e <= 0.0) {
            const double e0 = res.expected_change[i - 1];
            const double k0 = res.kappa_grid[i - 1];
            res.flip_kappa = k0 + (kappa - k0) * e0 / (e0 - e);  // exact: E is linear in kappa
            found = true;
        }
    }
    res.report.sample_size = easy.tuple_count;

    if (!found) {
        res.report.predicted = "sign flip on the kappa grid";
        res.report.note = "expected change never flips sign";
        res.report.pass = false;
        return res;
    }

    // threshold C = C_B / (B h G) with C_B evaluated at the flip composition
    const double c_b = (1.0 - res.flip_kappa) * b * c_bar;
    res.c_threshold = c_b / (b * inst.h * g);
    res.report.measured = res.flip_kappa * easy.sigma_l;
    res.report.predicted = "kappa*sigma_L in [" + fmt(res.c_threshold / 2.0) + ", " +
                           fmt(2.0 * res.c_threshold) + "]";
    res.report.pass = res.report.measured >= res.c_threshold / 2.0 &&
                      res.report.measured <= 2.0 * res.c_threshold;
    res.report.note = "flip at kappa=" + fmt(res.flip_kappa) + ", sigma_L=" + fmt(easy.sigma_l) +
                      ", C=" + fmt(res.c_threshold);
    return res;
}

Theorem2Result probe_theorem2(const Theorem2Instance& inst) {
    Theorem2Result res;
    res.report.name = "theorem2";
    res.report.predicted = "J > 0 under the length reward, J < 0 decoupled";

    // group: every correct rollout that keeps thinking past its K*
    RolloutGroup group;
    group.prompt = inst.prompt;
    std::vector<std::optional<int>> kstars;
    std::vector<double> weights;
    for (const auto& wr : enumerate_rollouts(inst.policy, inst.vocab, inst.prompt, inst.t_max)) {
        const Rollout& r = wr.rollout;
        if (!r.correct || !r.nrp_end || r.thinking_len() <= *r.nrp_end) continue;
        kstars.push_back(r.nrp_end);
        // importance weight: probability of the prefix through the first
        // redundant token
        weights.push_back(prefix_probability(inst.policy, inst.vocab, inst.prompt, r,
                                             *r.nrp_end + 1));
        group.rollouts.push_back(r);
    }
    const int g = static_cast<int>(group.rollouts.size());
    res.group_size = g;
    res.report.sample_size = g;
    if (g < 2) {
        res.report.applicable = false;
        res.report.note = "fewer than two redundant correct rollouts";
        return res;
    }

    double wsum = 0.0;
    for (double w : weights) wsum += w;

    std::vector<double> rewards(g);
    for (int i = 0; i < g; ++i) rewards[i] = length_reward(group.rollouts[i], inst.gamma);
    const auto adv_seq = grpo_advantage(rewards);
    for (int i = 0; i < g; ++i) res.j_vanilla += weights[i] * adv_seq[i];
    res.j_vanilla /= wsum;

    const auto adv_tok = decs_advantage(decoupled_rewards(group, kstars, inst.params));
    for (int i = 0; i < g; ++i)
        res.j_decoupled += weights[i] * adv_tok.values[i][*kstars[i]];  // column K*+1, 0-based K*
    res.j_decoupled /= wsum;

    res.report.measured = res.j_vanilla;
    res.report.pass = res.j_vanilla > 0.0 && res.j_decoupled < 0.0;
    res.report.note = "J_length=" + fmt(res.j_vanilla) + ", J_decoupled=" + fmt(res.j_decoupled);
    return res;
}

EasyGroupInstance default_lemma2_instance(int variant) {
    EasyGroupInstance inst;
    inst.vocab = Vocab::make(2, 1, 0);
    inst.prompt = {0, inst.vocab.answer_tokens[0], 0.2};
    inst.t_max = 6;
    inst.group_size = 3;
    inst.gamma = 0.001;

    TabularPolicy policy(inst.vocab.size(), 1, 1.0);
    RngStream rng(mix_seed(0x1e22a2, static_cast<uint64_t>(variant)));
    auto perturb = [&](const Context& ctx) {
        std::vector<double> row(inst.vocab.size(), 0.0);
        if (variant > 0)
            for (double& z : row) z = rng.uniform() - 0.5;
        row[inst.vocab.answer_tokens[0]] += 0.8;  // keep the correct support heavy
        row[inst.vocab.high_entropy_tokens[0]] -= 0.8;  // easy prompts rarely branch
        policy.set_logits(ctx, row);
    };
    perturb({0, {}});
    for (TokenId t = 0; t < inst.vocab.size(); ++t)
        if (t != inst.vocab.eos) perturb({0, {t}});
    inst.policy = policy;
    return inst;
}

Theorem1Instance default_theorem1_instance() {
    Theorem1Instance inst;
    inst.easy = default_lemma2_instance(0);
    inst.batch_size = 8;
    inst.h = 0.2;
    inst.grid_points = 21;
    inst.gamma = inst.easy.gamma;

    const Vocab& v = inst.easy.vocab;
    const TokenId a0 = v.answer_tokens[0];
    const TokenId a1 = v.answer_tokens[1];
    const TokenId hi = v.high_entropy_tokens[0];
    const TokenId te = v.think_end;
    const TokenId eos = v.eos;

    // replay policy for the mixed prompt class: separators carry more mass
    TabularPolicy mixed(v.size(), 1, 1.0);
    auto bias_row = [&](const Context& ctx) {
        std::vector<double> row(v.size(), 0.0);
        row[hi] = 1.5;
        mixed.set_logits(ctx, row);
    };
    bias_row({1, {}});
    for (TokenId t = 0; t < v.size(); ++t)
        if (t != eos) bias_row({1, {t}});
    inst.mixed_policy = mixed;

    const Prompt hard{1, a0, 0.6};
    auto make = [&](std::vector<TokenId> toks) { return annotate_rollout(std::move(toks), v, a0); };
    inst.mixed.push_back({hard,
                          {make({hi, a0, te, a0, eos}),
                           make({hi, a0, hi, te, a0, eos}),
                           make({hi, a1, te, a1, eos})}});
    inst.mixed.push_back({hard,
                          {make({a0, hi, te, a0, eos}),
                           make({hi, hi, a1, te, a1, eos}),
                           make({hi, a1, te, a1, eos})}});
    inst.mixed.push_back({hard,
                          {make({hi, hi, a0, te, a0, eos}),
                           make({a1, hi, te, a1, eos}),
                           make({hi, te, a1, eos})}});
    return inst;
}

Theorem2Instance default_theorem2_instance(int variant) {
    Theorem2Instance inst;
    inst.vocab = Vocab::make(2, 1, 0);
    inst.prompt = {0, inst.vocab.answer_tokens[0], 0.2};
    inst.t_max = 6;
    inst.gamma = 0.001;
    inst.params = RewardParams{};

    TabularPolicy policy(inst.vocab.size(), 1, 1.0);
    RngStream rng(mix_seed(0x7e02, static_cast<uint64_t>(variant)));
    auto fill = [&](const Context& ctx) {
        std::vector<double> row(inst.vocab.size(), 0.0);
        if (variant > 0)
            for (double& z : row) z = 0.6 * rng.uniform() - 0.3;
        // ending thinking is likelier than any single continuation, so shorter
        // rollouts carry more probability
        row[inst.vocab.think_end] += 0.5;
        policy.set_logits(ctx, row);
    };
    fill({0, {}});
    for (TokenId t = 0; t < inst.vocab.size(); ++t)
        if (t != inst.vocab.eos) fill({0, {t}});
    inst.policy = policy;
    return inst;
}

}  // namespace decs
