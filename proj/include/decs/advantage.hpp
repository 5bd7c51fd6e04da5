#pragma once

#include <string>
#include <vector>

#include "decs/rewards.hpp"

namespace decs {

enum class Estimator { grpo, decs, rpp };

Estimator parse_estimator(const std::string& name);

struct AdvantageMatrix {
    std::vector<std::vector<double>> values;  // G rows, L_max columns
    std::vector<int> lengths;
    Estimator tag = Estimator::grpo;

    bool is_pad(int i, int j) const { return j >= lengths[i]; }
};

// Sequence-level GRPO standardization (population std). Zero-variance groups
// yield all-zero advantages.
std::vector<double> grpo_advantage(std::span<const double> rewards);

// Per-position standardization across the group (population std per column).
AdvantageMatrix decs_advantage(const TokenRewardMatrix& rewards);

// REINFORCE++ variant: per-position group-mean subtraction, then whitening by
// the batch-global token mean/std (sample std, n-1) over non-pad positions.
std::vector<AdvantageMatrix> rpp_advantage(const std::vector<TokenRewardMatrix>& batch);

}  // namespace decs
