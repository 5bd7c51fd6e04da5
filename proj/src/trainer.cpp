#include "decs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "decs/metrics.hpp"

namespace decs {

namespace fs = std::filesystem;
using nlohmann::json;

double schedule_kappa(CurriculumState& state, double r_m, double kappa0_m) {
    if (r_m < 0.0 || r_m > 1.0 || kappa0_m < 0.0 || kappa0_m > 1.0)
        throw std::invalid_argument("schedule_kappa inputs must lie in [0,1]");
    if (!state.initialized) {
        state.kappa_prev = kappa0_m;
        state.r_prev = r_m;
        state.initialized = true;
    }
    double kappa = state.kappa_prev + state.beta * (r_m - state.r_prev);
    kappa = std::clamp(kappa, 0.0, kappa0_m);
    state.kappa_prev = kappa;
    state.r_prev = r_m;
    return kappa;
}

std::string RunRecord::to_json() const {
    json j;
    j["step"] = step;
    j["kappa"] = kappa;
    j["kappa0"] = kappa0;
    j["R"] = r;
    j["mean_length"] = mean_length;
    j["mean_thinking_length"] = mean_thinking_length;
    j["accuracy"] = accuracy;
    j["mean_reward"] = mean_reward;
    j["high_entropy_freq"] = high_entropy_freq;
    j["all_incorrect_in_batch"] = all_incorrect_in_batch;
    return j.dump();
}

RunRecord RunRecord::from_json(const std::string& line) {
    const json j = json::parse(line);
    RunRecord r;
    r.step = j.at("step").get<int>();
    r.kappa = j.at("kappa").get<double>();
    r.kappa0 = j.at("kappa0").get<double>();
    r.r = j.at("R").get<double>();
    r.mean_length = j.at("mean_length").get<double>();
    r.mean_thinking_length = j.at("mean_thinking_length").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.mean_reward = j.at("mean_reward").get<double>();
    r.high_entropy_freq = j.at("high_entropy_freq").get<double>();
    r.all_incorrect_in_batch = j.at("all_incorrect_in_batch").get<int>();
    return r;
}

namespace {

EnvConfig env_config_from(const Config& cfg) {
    EnvConfig e;
    e.classes = static_cast<int>(cfg.get_int("env.classes"));
    e.n_answer = static_cast<int>(cfg.get_int("env.answer_tokens"));
    e.n_high = static_cast<int>(cfg.get_int("env.high_entropy_tokens"));
    e.n_filler = static_cast<int>(cfg.get_int("env.filler_tokens"));
    e.context_order = static_cast<int>(cfg.get_int("env.context_order"));
    e.t_max = static_cast<int>(cfg.get_int("env.t_max"));
    e.difficulty_mix = cfg.get_double_list("env.difficulty_mix");
    e.difficulty = cfg.get_double_list("env.difficulty");
    e.init_bias_answer = cfg.get_double("env.init_bias_answer");
    e.init_bias_think_end = cfg.get_double("env.init_bias_think_end");
    return e;
}

constexpr uint64_t kPromptTag = 0x70726f6d70ULL;  // stream domain separators
constexpr uint64_t kEvalTag = 0x6576616cULL;

}  // namespace

Trainer::Trainer(const Config& cfg)
    : cfg_(cfg),
      env_(env_config_from(cfg)),
      policy_(env_.make_initial_policy(cfg.get_double("policy.learning_rate"))) {
    curriculum_.beta = cfg.get_double("trainer.beta");
    reward_mode_ = cfg.get_string("reward.mode");
    if (reward_mode_ != "decoupled" && reward_mode_ != "length" && reward_mode_ != "correctness")
        throw std::runtime_error("reward.mode must be decoupled|length|correctness");
    estimator_ = parse_estimator(cfg.get_string("advantage.estimator"));
    reward_params_.gamma = cfg.get_double("reward.gamma");
    reward_params_.r_plus = cfg.get_double("reward.r_plus");
    reward_params_.r_zero = cfg.get_double("reward.r_zero");
    reward_params_.l_is_thinking = cfg.get_string("reward.l_denominator") == "thinking";
    reward_params_.validate();
    curriculum_on_ = cfg.get_string("trainer.curriculum") == "on";
    chunk_granularity_ = cfg.get_string("reward.nrp_granularity") == "chunk";
    const std::string endpoint = cfg.get_string("judge.endpoint");
    if (!endpoint.empty())
        judge_ = std::make_unique<RemoteJudge>(endpoint,
                                               static_cast<int>(cfg.get_int("judge.timeout_ms")));
    else
        judge_ = std::make_unique<OracleJudge>(env_.vocab());
    if (cfg.get_int("trainer.batch_size") < 1 || cfg.get_int("trainer.group_size") < 2)
        throw std::runtime_error("trainer requires B >= 1 and G >= 2");
}

RolloutGroup Trainer::sample_group(const TabularPolicy& policy, int step, long attempt) const {
    const uint64_t seed = cfg_.seed();
    RngStream prompt_rng(mix_seed(mix_seed(seed, kPromptTag), mix_seed(step, attempt)));
    RolloutGroup group;
    group.prompt = env_.sample_prompt(prompt_rng);
    const int g = static_cast<int>(cfg_.get_int("trainer.group_size"));
    group.rollouts.resize(g);
    for (int i = 0; i < g; ++i) {
        RngStream rng(mix_seed(mix_seed(seed, static_cast<uint64_t>(step)),
                               mix_seed(static_cast<uint64_t>(attempt), i + 1)));
        group.rollouts[i] = env_.rollout(policy, group.prompt, rng);
    }
    return group;
}

std::vector<RolloutGroup> Trainer::sample_wave(const TabularPolicy& policy, int step,
                                               long first_attempt, int count,
                                               bool serial) const {
    std::vector<RolloutGroup> wave(count);
    if (serial) {
        for (int a = 0; a < count; ++a)
            wave[a] = sample_group(policy, step, first_attempt + a);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (int a = 0; a < count; ++a)
            wave[a] = sample_group(policy, step, first_attempt + a);
    }
    return wave;
}

std::vector<RolloutGroup> Trainer::collect_groups(const TabularPolicy& policy, int step,
                                                  double& kappa0, long& attempt_counter) const {
    const int b = static_cast<int>(cfg_.get_int("trainer.batch_size"));
    const long budget = cfg_.get_int("trainer.resample_budget") * static_cast<long>(b) + b;
    std::vector<RolloutGroup> groups;
    long used = 0;
    while (static_cast<int>(groups.size()) < b) {
        const int need = b - static_cast<int>(groups.size());
        if (used + need > budget)
            throw StepAborted("resampling budget exhausted at step " + std::to_string(step));
        auto wave = sample_wave(policy, step, attempt_counter, need);
        attempt_counter += need;
        used += need;
        for (auto& g : wave)
            if (!g.is_all_incorrect()) groups.push_back(std::move(g));
    }
    int easy = 0;
    for (const auto& g : groups)
        if (g.is_all_correct()) ++easy;
    kappa0 = static_cast<double>(easy) / b;
    return groups;
}

void Trainer::assemble_batch(std::vector<RolloutGroup>& groups, double kappa, int step,
                             long& attempt_counter) const {
    const int b = static_cast<int>(groups.size());
    const int quota = static_cast<int>(std::floor(kappa * b));
    std::vector<int> easy_idx;
    for (int i = 0; i < b; ++i)
        if (groups[i].is_all_correct()) easy_idx.push_back(i);
    if (static_cast<int>(easy_idx.size()) <= quota) return;

    // Keep the shortest-mean-length easy groups first; replace the rest.
    auto mean_len = [&](int i) {
        double s = 0.0;
        for (const auto& r : groups[i].rollouts) s += r.length();
        return s / groups[i].rollouts.size();
    };
    std::stable_sort(easy_idx.begin(), easy_idx.end(),
                     [&](int a, int c) { return mean_len(a) < mean_len(c); });

    const long budget = cfg_.get_int("trainer.resample_budget");
    for (size_t k = quota; k < easy_idx.size(); ++k) {
        bool replaced = false;
        for (long attempt = 0; attempt < budget; ++attempt) {
            auto wave = sample_wave(policy_, step, attempt_counter, 1);
            ++attempt_counter;
            if (!wave[0].is_all_incorrect() && !wave[0].is_all_correct()) {
                groups[easy_idx[k]] = std::move(wave[0]);
                replaced = true;
                break;
            }
        }
        if (!replaced)
            throw StepAborted("insufficient mixed groups to backfill at step " +
                              std::to_string(step));
    }
}

std::optional<int> Trainer::resolved_kstar(const Rollout& rollout, const Prompt& prompt) const {
    if (!rollout.correct) return std::nullopt;
    std::optional<int> kstar;
    if (chunk_granularity_)
        kstar = chunk_kstar(rollout, prompt, env_.vocab(), *judge_);
    else
        kstar = rollout.nrp_end;
    // A correct rollout whose thinking never surfaces the answer has no
    // necessary prefix: the entire thinking segment counts as redundant.
    return kstar ? kstar : std::optional<int>(0);
}

double Trainer::batch_pnrp(const std::vector<RolloutGroup>& groups) const {
    double k_sum = 0.0, t_sum = 0.0;
    for (const auto& g : groups)
        for (const auto& r : g.rollouts) {
            if (!r.correct || r.thinking_len() == 0) continue;
            const auto kstar = resolved_kstar(r, g.prompt);
            k_sum += kstar.value_or(0);
            t_sum += r.thinking_len();
        }
    return t_sum > 0.0 ? k_sum / t_sum : 0.0;
}

std::vector<PpoSample> Trainer::build_samples(const std::vector<RolloutGroup>& batch,
                                              std::vector<double>& reward_sink) const {
    std::vector<PpoSample> samples;
    std::vector<AdvantageMatrix> advs;

    if (reward_mode_ == "decoupled") {
        std::vector<TokenRewardMatrix> rewards;
        rewards.reserve(batch.size());
        for (const auto& g : batch) {
            std::vector<std::optional<int>> kstars;
            kstars.reserve(g.rollouts.size());
            for (const auto& r : g.rollouts) kstars.push_back(resolved_kstar(r, g.prompt));
            rewards.push_back(decoupled_rewards(g, kstars, reward_params_));
        }
        for (const auto& m : rewards)
            for (int i = 0; i < m.rows(); ++i)
                for (int j = 0; j < m.lengths[i]; ++j) reward_sink.push_back(m.values[i][j]);
        if (estimator_ == Estimator::rpp) {
            advs = rpp_advantage(rewards);
        } else {
            for (const auto& m : rewards) advs.push_back(decs_advantage(m));
        }
    } else {
        for (const auto& g : batch) {
            std::vector<double> seq_rewards;
            for (const auto& r : g.rollouts) {
                const double rw = reward_mode_ == "length"
                                      ? length_reward(r, reward_params_.gamma)
                                      : correctness_reward(r);
                seq_rewards.push_back(rw);
                reward_sink.push_back(rw);
            }
            auto a = grpo_advantage(seq_rewards);
            AdvantageMatrix m;
            m.tag = Estimator::grpo;
            int l_max = 0;
            for (const auto& r : g.rollouts) l_max = std::max(l_max, r.length());
            for (size_t i = 0; i < g.rollouts.size(); ++i) {
                m.values.emplace_back(l_max, a[i]);
                m.lengths.push_back(g.rollouts[i].length());
            }
            advs.push_back(std::move(m));
        }
    }

    const int order = policy_.context_order();
    for (size_t gi = 0; gi < batch.size(); ++gi) {
        const auto& g = batch[gi];
        for (size_t i = 0; i < g.rollouts.size(); ++i) {
            const auto& r = g.rollouts[i];
            Context ctx{g.prompt.prompt_class, {}};
            for (int j = 0; j < r.length(); ++j) {
                const TokenId tok = r.tokens[j];
                const double adv = advs[gi].values[i][j];
                if (adv != 0.0) {
                    const double old_prob = policy_.next_dist(ctx)[tok];
                    samples.push_back({ctx, tok, adv, old_prob});
                }
                ctx = ctx.advanced(tok, order);
            }
        }
    }
    return samples;
}

RunRecord Trainer::train_step(int step, const std::vector<RolloutGroup>& batch, double kappa,
                              double kappa0, double r_m) {
    RunRecord rec;
    rec.step = step;
    rec.kappa = kappa;
    rec.kappa0 = kappa0;
    rec.r = r_m;

    long n = 0, n_think = 0, n_high = 0, n_correct = 0, n_rollouts = 0;
    for (const auto& g : batch) {
        if (g.is_all_incorrect()) ++rec.all_incorrect_in_batch;
        for (const auto& r : g.rollouts) {
            ++n_rollouts;
            n += r.length();
            n_think += r.thinking_len();
            if (r.correct) ++n_correct;
            for (int j = 0; j < r.thinking_len(); ++j)
                if (env_.vocab().is_high_entropy(r.tokens[j])) ++n_high;
        }
    }
    rec.mean_length = static_cast<double>(n) / n_rollouts;
    rec.mean_thinking_length = static_cast<double>(n_think) / n_rollouts;
    rec.accuracy = static_cast<double>(n_correct) / n_rollouts;
    rec.high_entropy_freq = n_think > 0 ? static_cast<double>(n_high) / n_think : 0.0;

    std::vector<double> rewards;
    auto samples = build_samples(batch, rewards);
    rec.mean_reward =
        rewards.empty()
            ? 0.0
            : std::accumulate(rewards.begin(), rewards.end(), 0.0) / rewards.size();

    if (!samples.empty()) policy_.ppo_update(samples, cfg_.get_double("trainer.clip_eps"));
    if (!std::isfinite(rec.mean_reward))
        throw std::runtime_error("non-finite loss at step " + std::to_string(step));
    return rec;
}

void Trainer::write_eval_dump(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    const int n = static_cast<int>(cfg_.get_int("eval.samples_per_prompt"));
    for (int cls = 0; cls < env_.config().classes; ++cls) {
        const Prompt prompt = env_.prompt_for_class(cls);
        for (int i = 0; i < n; ++i) {
            RngStream rng(mix_seed(mix_seed(cfg_.seed(), kEvalTag),
                                   mix_seed(static_cast<uint64_t>(cls), i + 1)));
            const Rollout r = env_.rollout(policy_, prompt, rng);
            json j;
            j["prompt_class"] = cls;
            j["tokens"] = r.tokens;
            j["correct"] = r.correct;
            if (r.nrp_end)
                j["kstar"] = *r.nrp_end;
            else
                j["kstar"] = nullptr;
            j["thinking_len"] = r.thinking_len();
            out << j.dump() << "\n";
        }
    }
}

void Trainer::run(const std::string& run_dir, const std::optional<std::string>& resume_from) {
    fs::create_directories(run_dir);
    fs::create_directories(fs::path(run_dir) / "checkpoints");

    {
        std::ofstream snap(fs::path(run_dir) / "config.snapshot");
        snap << cfg_.snapshot();
    }

    std::vector<std::string> prior_records;
    if (resume_from) {
        // Find the latest checkpoint and replay its run's records up to it.
        int best = -1;
        for (const auto& e : fs::directory_iterator(fs::path(*resume_from) / "checkpoints")) {
            const std::string name = e.path().filename().string();
            int s = 0;
            if (std::sscanf(name.c_str(), "step-%d.policy", &s) == 1) best = std::max(best, s);
        }
        if (best < 0) throw std::runtime_error("no checkpoint found in " + *resume_from);
        const auto base =
            fs::path(*resume_from) / "checkpoints" / ("step-" + std::to_string(best));
        policy_ = TabularPolicy::load_file(base.string() + ".policy",
                                           cfg_.get_double("policy.learning_rate"));
        std::ifstream st(base.string() + ".state");
        std::string key, eq;
        double val = 0.0;
        while (st >> key >> eq >> val) {
            if (key == "kappa_prev") curriculum_.kappa_prev = val;
            else if (key == "r_prev") curriculum_.r_prev = val;
            else if (key == "initialized") curriculum_.initialized = val != 0.0;
        }
        next_step_ = best + 1;
        std::ifstream rec(fs::path(*resume_from) / "records.jsonl");
        std::string line;
        while (std::getline(rec, line)) {
            if (line.empty()) continue;
            prior_records.push_back(line);
        }
        // Drop records past the checkpoint (header line has no "step").
        std::vector<std::string> kept;
        for (const auto& l : prior_records) {
            const json j = json::parse(l);
            if (!j.contains("step") || j.at("step").get<int>() <= best) kept.push_back(l);
        }
        prior_records = std::move(kept);
    }

    std::ofstream records(fs::path(run_dir) / "records.jsonl");
    if (prior_records.empty()) {
        json header;
        header["type"] = "header";
        header["format"] = "decs-records v1";
        header["seed"] = cfg_.seed();
        records << header.dump() << "\n";
    } else {
        for (const auto& l : prior_records) records << l << "\n";
    }

    const int steps = static_cast<int>(cfg_.get_int("trainer.steps"));
    const int ckpt_every = static_cast<int>(cfg_.get_int("trainer.checkpoint_every"));
    RunRecord last;
    for (int step = next_step_; step <= steps; ++step) {
        // An aborted step discards its batch entirely: no update, no record,
        // and the curriculum schedule stays where it was.
        const CurriculumState saved = curriculum_;
        try {
            long attempts = 0;
            double kappa0 = 0.0;
            auto groups = collect_groups(policy_, step, kappa0, attempts);
            const double r_m = batch_pnrp(groups);
            double kappa = kappa0;
            if (curriculum_on_) {
                kappa = schedule_kappa(curriculum_, r_m, kappa0);
                assemble_batch(groups, kappa, step, attempts);
            }
            last = train_step(step, groups, kappa, kappa0, r_m);
            records << last.to_json() << "\n";
        } catch (const StepAborted&) {
            curriculum_ = saved;
        }
        if (step % ckpt_every == 0 || step == steps) {
            const auto base = fs::path(run_dir) / "checkpoints" / ("step-" + std::to_string(step));
            policy_.save_file(base.string() + ".policy");
            std::ofstream st(base.string() + ".state");
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", curriculum_.kappa_prev);
            st << "kappa_prev = " << buf << "\n";
            std::snprintf(buf, sizeof(buf), "%.17g", curriculum_.r_prev);
            st << "r_prev = " << buf << "\n";
            st << "initialized = " << (curriculum_.initialized ? 1 : 0) << "\n";
        }
    }
    records.close();

    write_eval_dump((fs::path(run_dir) / "eval_rollouts.jsonl").string());

    std::ofstream summary(fs::path(run_dir) / "summary.csv");
    summary << "steps,final_kappa,final_R,final_mean_length,final_mean_thinking_length,"
               "final_accuracy,final_mean_reward\n";
    summary << steps << "," << last.kappa << "," << last.r << "," << last.mean_length << ","
            << last.mean_thinking_length << "," << last.accuracy << "," << last.mean_reward
            << "\n";
}

}  // namespace decs
