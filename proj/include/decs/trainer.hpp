#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "decs/advantage.hpp"
#include "decs/config.hpp"
#include "decs/env.hpp"
#include "decs/nrp.hpp"
#include "decs/rewards.hpp"

namespace decs {

struct CurriculumState {
    double kappa_prev = 0.0;
    double r_prev = 0.0;
    double beta = 0.2;
    bool initialized = false;
};

// kappa_m = clip(kappa_{m-1} + beta * (R_m - R_{m-1}), 0, kappa0_m).
// On the first call the state is seeded from the measured batch: kappa_prev =
// kappa0_m and R_prev = R_m.
double schedule_kappa(CurriculumState& state, double r_m, double kappa0_m);

struct RunRecord {
    int step = 0;
    double kappa = 0.0;
    double kappa0 = 0.0;
    double r = 0.0;  // batch mean PNRP
    double mean_length = 0.0;
    double mean_thinking_length = 0.0;
    double accuracy = 0.0;
    double mean_reward = 0.0;
    double high_entropy_freq = 0.0;
    int all_incorrect_in_batch = 0;  // groups reaching the update; always 0

    std::string to_json() const;
    static RunRecord from_json(const std::string& line);
};

struct StepAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Trainer {
public:
    explicit Trainer(const Config& cfg);

    const SynthEnv& env() const { return env_; }
    const TabularPolicy& policy() const { return policy_; }

    // Draw one wave of rollout groups; attempts index the deterministic rng
    // streams, so parallel and serial paths produce identical groups.
    std::vector<RolloutGroup> sample_wave(const TabularPolicy& policy, int step,
                                          long first_attempt, int count,
                                          bool serial = false) const;

    // DAPO-style filter with over-sampling: exactly B groups, none
    // all-incorrect. kappa0 receives the sampled easy ratio.
    std::vector<RolloutGroup> collect_groups(const TabularPolicy& policy, int step,
                                             double& kappa0, long& attempt_counter) const;

    // Retain at most floor(kappa * B) all-correct groups; excess replaced by
    // over-sampled mixed groups.
    void assemble_batch(std::vector<RolloutGroup>& groups, double kappa, int step,
                        long& attempt_counter) const;

    // One optimization step over an assembled batch; mutates the policy.
    RunRecord train_step(int step, const std::vector<RolloutGroup>& batch, double kappa,
                         double kappa0, double r_m);

    // Full loop: config.snapshot, records.jsonl, checkpoints/, summary.csv,
    // eval_rollouts.jsonl. resume_from, when given, loads the latest
    // checkpoint from that run directory and continues.
    void run(const std::string& run_dir, const std::optional<std::string>& resume_from = {});

    double batch_pnrp(const std::vector<RolloutGroup>& groups) const;
    std::optional<int> resolved_kstar(const Rollout& rollout, const Prompt& prompt) const;

    void write_eval_dump(const std::string& path) const;

private:
    Config cfg_;
    SynthEnv env_;
    TabularPolicy policy_;
    CurriculumState curriculum_;
    int next_step_ = 1;

    std::string reward_mode_;
    Estimator estimator_;
    RewardParams reward_params_;
    bool curriculum_on_ = true;
    bool chunk_granularity_ = false;
    std::unique_ptr<Judge> judge_;

    RolloutGroup sample_group(const TabularPolicy& policy, int step, long attempt) const;
    std::vector<PpoSample> build_samples(const std::vector<RolloutGroup>& batch,
                                         std::vector<double>& reward_sink) const;
};

}  // namespace decs
