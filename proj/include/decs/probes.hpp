#pragma once

#include <string>
#include <vector>

#include "decs/enumerate.hpp"
#include "decs/rewards.hpp"

namespace decs {

struct ProbeReport {
    std::string name;
    double measured = 0.0;
    std::string predicted;
    long sample_size = 0;
    bool pass = false;
    bool applicable = true;
    std::string note;

    std::string to_json() const;
    std::string to_table_row() const;
};

// Annotate a hand-built token sequence with the episode-protocol fields.
Rollout annotate_rollout(std::vector<TokenId> tokens, const Vocab& vocab, TokenId target);

// --- Lemma 1: exactness of the tabular logit update ------------------------

// Randomized centered-advantage instances; measured value is the max
// elementwise |dz - eta*pi*A| against the closed-form expected-gradient
// oracle. Pass iff <= 1e-10.
ProbeReport probe_lemma1(uint64_t seed, int trials);

// --- Lemma 2: expected high-entropy logit change on all-correct groups -----

struct EasyGroupInstance {
    TabularPolicy policy;
    Vocab vocab;
    Prompt prompt;
    int t_max = 6;
    int group_size = 3;
    double gamma = 0.001;
};

struct EasyGroupStats {
    double expected_change = 0.0;  // E[sum over high-entropy positions of pi*A]
    double sigma_l = 0.0;          // expected within-group length std
    long tuple_count = 0;
    bool degenerate = false;       // no length variance in the correct support
};

// Exact expectation over G-tuples of correct rollouts (conditioned on
// correctness), Eq. 4 rewards with the group-relative advantage broadcast.
EasyGroupStats easy_group_expectation(const EasyGroupInstance& inst);

ProbeReport probe_lemma2(const EasyGroupInstance& inst);

// --- Theorem 1: batch condition for high-entropy maintenance ---------------

struct MixedGroupSpec {
    Prompt prompt;
    std::vector<Rollout> rollouts;
};

struct Theorem1Instance {
    EasyGroupInstance easy;
    TabularPolicy mixed_policy;  // policy used to replay mixed rollouts
    std::vector<MixedGroupSpec> mixed;
    int batch_size = 8;
    double h = 0.2;
    int grid_points = 21;
    double gamma = 0.001;
};

struct Theorem1Result {
    ProbeReport report;
    std::vector<double> kappa_grid;
    std::vector<double> expected_change;  // batch expected high-entropy logit change
    double flip_kappa = 0.0;
    double sigma_l = 0.0;
    double c_threshold = 0.0;  // C = C_B / (B h G) evaluated at the flip
};

Theorem1Result probe_theorem1(const Theorem1Instance& inst);

// --- Theorem 2: first-redundant-token signal -------------------------------

struct Theorem2Instance {
    TabularPolicy policy;
    Vocab vocab;
    Prompt prompt;
    int t_max = 6;
    double gamma = 0.001;
    RewardParams params;
};

struct Theorem2Result {
    ProbeReport report;
    double j_vanilla = 0.0;    // expected first-redundant signal under Eq. 4
    double j_decoupled = 0.0;  // same expectation under Eq. 9/10 advantages
    long group_size = 0;
};

Theorem2Result probe_theorem2(const Theorem2Instance& inst);

// Shipped probe instances; `variant` seeds small logit perturbations.
EasyGroupInstance default_lemma2_instance(int variant = 0);
Theorem1Instance default_theorem1_instance();
Theorem2Instance default_theorem2_instance(int variant = 0);

}  // namespace decs
