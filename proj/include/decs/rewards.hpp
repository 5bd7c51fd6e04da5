#pragma once

#include <optional>
#include <vector>

#include "decs/env.hpp"

namespace decs {

struct RewardParams {
    double gamma = 0.001;   // length penalty coefficient for the sequence-level reward
    double r_plus = 1.1;
    double r_zero = 1.0;
    bool l_is_thinking = false;  // denominator of the redundant-token branch

    void validate() const;
};

// G x L_max padded per-token reward matrix. Entries beyond a rollout's length
// are padding and still carry a defined reward value.
struct TokenRewardMatrix {
    std::vector<std::vector<double>> values;  // G rows, L_max columns
    std::vector<int> lengths;                 // real length per row

    int rows() const { return static_cast<int>(values.size()); }
    int cols() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
    bool is_pad(int i, int j) const { return j >= lengths[i]; }  // j 0-based
};

double correctness_reward(const Rollout& rollout);

// Sequence-level length reward: 1 - gamma * L for correct rollouts, 0 otherwise.
double length_reward(const Rollout& rollout, double gamma);

// Token-level decoupled reward over a padded group. kstars carries one K* per
// rollout; a correct rollout with an unresolved K* (judge failure) aborts the
// whole group.
TokenRewardMatrix decoupled_rewards(const RolloutGroup& group,
                                    const std::vector<std::optional<int>>& kstars,
                                    const RewardParams& params);

}  // namespace decs
