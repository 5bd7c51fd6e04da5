#pragma once

#include <vector>

#include "decs/env.hpp"

namespace decs {

struct WeightedRollout {
    Rollout rollout;
    double prob = 0.0;
};

// Exact enumeration of the episode protocol's rollout distribution, including
// truncation leaves. Leaf probabilities sum to 1 within 1e-9. Throws when the
// leaf count would exceed `guard`.
std::vector<WeightedRollout> enumerate_rollouts(const TabularPolicy& policy, const Vocab& vocab,
                                                const Prompt& prompt, int max_len,
                                                long guard = 10'000'000);

// Exact probability of generating the first `prefix_len` tokens of a rollout
// under the episode protocol.
double prefix_probability(const TabularPolicy& policy, const Vocab& vocab, const Prompt& prompt,
                          const Rollout& rollout, int prefix_len);

}  // namespace decs
