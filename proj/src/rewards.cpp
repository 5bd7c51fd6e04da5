#include "decs/rewards.hpp"

#include <algorithm>
#include <stdexcept>

namespace decs {

void RewardParams::validate() const {
    if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
    if (!(r_plus > r_zero && r_zero > 0.0))
        throw std::invalid_argument("reward params require r_plus > r_zero > 0");
}

double correctness_reward(const Rollout& rollout) { return rollout.correct ? 1.0 : 0.0; }

double length_reward(const Rollout& rollout, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
    return rollout.correct ? 1.0 - gamma * rollout.length() : 0.0;
}

TokenRewardMatrix decoupled_rewards(const RolloutGroup& group,
                                    const std::vector<std::optional<int>>& kstars,
                                    const RewardParams& params) {
    params.validate();
    const int g = static_cast<int>(group.rollouts.size());
    if (static_cast<int>(kstars.size()) != g)
        throw std::invalid_argument("one K* entry per rollout required");

    int l_max = 0;
    for (const auto& r : group.rollouts) l_max = std::max(l_max, r.length());

    TokenRewardMatrix m;
    m.values.assign(g, std::vector<double>(l_max, 0.0));
    m.lengths.resize(g);
    for (int i = 0; i < g; ++i) {
        const Rollout& r = group.rollouts[i];
        m.lengths[i] = r.length();
        if (!r.correct) continue;  // indicator gates both branches
        if (!kstars[i])
            throw std::runtime_error("correct rollout without resolved K* (judge failure)");
        const int kstar = *kstars[i];
        const int think_len = r.thinking_len();
        const double denom = params.l_is_thinking ? std::max(think_len, 1) : r.length();
        const double redundant = params.r_zero + (params.r_plus - params.r_zero) / denom;
        for (int j = 1; j <= l_max; ++j) {  // 1-based position
            const bool in_thinking = j <= think_len;
            const bool pad = j > r.length();
            double& cell = m.values[i][j - 1];
            if (pad || !in_thinking || j <= kstar)
                cell = params.r_plus;
            else
                cell = redundant;
        }
    }
    return m;
}

}  // namespace decs
