#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "decs/config.hpp"
#include "decs/metrics.hpp"
#include "decs/probes.hpp"
#include "decs/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

decs::Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
    decs::Config cfg = decs::Config::from_file(path);
    for (const auto& o : overrides) cfg.apply_override(o);
    return cfg;
}

struct DumpRow {
    int prompt_class = 0;
    int tokens = 0;
    bool correct = false;
    std::optional<int> kstar;
    int thinking_len = 0;
};

std::vector<DumpRow> read_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<DumpRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        DumpRow row;
        row.prompt_class = j.at("prompt_class").get<int>();
        row.tokens = static_cast<int>(j.at("tokens").size());
        row.correct = j.at("correct").get<bool>();
        if (!j.at("kstar").is_null()) row.kstar = j.at("kstar").get<int>();
        row.thinking_len = j.at("thinking_len").get<int>();
        rows.push_back(row);
    }
    return rows;
}

std::vector<decs::EvalSummary> summarize_dump(const std::vector<DumpRow>& rows,
                                              const std::vector<int>& k_list) {
    std::map<int, std::vector<DumpRow>> by_class;
    for (const auto& r : rows) by_class[r.prompt_class].push_back(r);
    std::vector<decs::EvalSummary> out;
    for (const auto& [cls, group] : by_class) {
        decs::EvalSummary s;
        s.prompt_class = cls;
        s.n = static_cast<int>(group.size());
        double tok = 0.0;
        std::vector<decs::PnrpSample> pn;
        for (const auto& r : group) {
            if (r.correct) ++s.c;
            tok += r.tokens;
            if (r.correct && r.kstar && r.thinking_len > 0)
                pn.push_back({*r.kstar, r.thinking_len});
        }
        s.mean_tokens = tok / s.n;
        for (int k : k_list) s.pass_at[k] = decs::pass_at_k(s.n, s.c, k);
        s.pnrp = decs::pnrp(pn);
        out.push_back(s);
    }
    return out;
}

void write_eval_csv(const std::string& path, const std::vector<decs::EvalSummary>& summaries,
                    const std::vector<int>& k_list) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "prompt_class,n,c";
    for (int k : k_list) out << ",pass@" << k;
    out << ",mean_tokens,pnrp\n";
    for (const auto& s : summaries) {
        out << s.prompt_class << "," << s.n << "," << s.c;
        for (int k : k_list) out << "," << s.pass_at.at(k);
        out << "," << s.mean_tokens << ",";
        if (s.pnrp) out << *s.pnrp;
        out << "\n";
    }
}

std::vector<int> parse_k_list(const decs::Config& cfg) {
    std::vector<int> ks;
    for (double v : cfg.get_double_list("eval.k_list")) ks.push_back(static_cast<int>(v));
    return ks;
}

int cmd_probe(const std::string& name, const decs::Config& cfg, bool as_json) {
    decs::ProbeReport rep;
    const int g = static_cast<int>(cfg.get_int("probe.group_size"));
    const int t_max = static_cast<int>(cfg.get_int("probe.t_max"));
    const double gamma = cfg.get_double("probe.gamma");
    if (name == "lemma1") {
        rep = decs::probe_lemma1(cfg.seed(), static_cast<int>(cfg.get_int("probe.trials")));
    } else if (name == "lemma2") {
        auto inst = decs::default_lemma2_instance(0);
        inst.group_size = g;
        inst.t_max = t_max;
        inst.gamma = gamma;
        rep = decs::probe_lemma2(inst);
    } else if (name == "theorem1") {
        auto inst = decs::default_theorem1_instance();
        rep = decs::probe_theorem1(inst).report;
    } else if (name == "theorem2") {
        auto inst = decs::default_theorem2_instance(0);
        inst.t_max = t_max;
        inst.gamma = gamma;
        rep = decs::probe_theorem2(inst).report;
    }
    std::cout << (as_json ? rep.to_json() : rep.to_table_row()) << "\n";
    return rep.applicable && rep.pass ? 0 : 1;
}

void cmd_report(const std::string& run_dir) {
    std::ifstream rec(fs::path(run_dir) / "records.jsonl");
    if (!rec) throw std::runtime_error("no records.jsonl in " + run_dir);
    std::vector<decs::RunRecord> records;
    std::string line;
    while (std::getline(rec, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);  // truncated records surface here
        if (!j.contains("step")) continue;  // header
        records.push_back(decs::RunRecord::from_json(line));
    }

    std::ofstream kappa(fs::path(run_dir) / "kappa_trace.csv");
    kappa << "step,kappa,kappa0,R\n";
    std::ofstream length(fs::path(run_dir) / "length_curve.csv");
    length << "step,mean_length,mean_thinking_length,accuracy\n";
    std::ofstream pnrp(fs::path(run_dir) / "pnrp_curve.csv");
    pnrp << "step,pnrp\n";
    for (const auto& r : records) {
        kappa << r.step << "," << r.kappa << "," << r.kappa0 << "," << r.r << "\n";
        length << r.step << "," << r.mean_length << "," << r.mean_thinking_length << ","
               << r.accuracy << "\n";
        pnrp << r.step << "," << r.r << "\n";
    }

    const fs::path dump = fs::path(run_dir) / "eval_rollouts.jsonl";
    const std::vector<int> k_list = {1, 2, 4, 8};
    std::vector<decs::EvalSummary> summaries;
    if (fs::exists(dump)) summaries = summarize_dump(read_dump(dump.string()), k_list);
    write_eval_csv((fs::path(run_dir) / "passk_table.csv").string(), summaries, k_list);
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
    if (const char* t = std::getenv("DECS_LAB_THREADS")) {
        const int n = std::atoi(t);
        if (n > 0) omp_set_num_threads(n);
    }
#endif

    CLI::App app{"Desk-scale laboratory for decoupled-reward curriculum training"};
    app.require_subcommand(1);

    std::string config_path, run_dir = "run-out", resume, probe_name, dump_path,
                out_path = "eval_summary.csv", sweep_key, sweep_values, sweep_root = "sweep-out";
    std::vector<std::string> overrides;
    bool probe_json = false;

    auto* train = app.add_subcommand("train", "Run the training loop");
    train->add_option("config", config_path, "config file")->required();
    train->add_option("--run-dir", run_dir, "output directory");
    train->add_option("--resume", resume, "run directory to resume from");
    train->add_option("--override", overrides, "key=value (repeatable)");

    auto* probe = app.add_subcommand("probe", "Check a logit-dynamics claim");
    probe->add_option("name", probe_name, "lemma1 | lemma2 | theorem1 | theorem2")
        ->required()
        ->check(CLI::IsMember({"lemma1", "lemma2", "theorem1", "theorem2"}));
    probe->add_option("--config", config_path, "config file for the probe block");
    probe->add_option("--override", overrides, "key=value (repeatable)");
    probe->add_flag("--json", probe_json, "machine-readable report");

    auto* eval = app.add_subcommand("eval", "Summarize a rollout dump");
    eval->add_option("dump", dump_path, "rollout dump (jsonl)")->required();
    eval->add_option("--out", out_path, "summary csv path");
    eval->add_option("--config", config_path, "config supplying eval.k_list");

    auto* report = app.add_subcommand("report", "Emit plot-data CSVs for a run");
    report->add_option("run_dir", run_dir, "run directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Train once per value of one key");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--key", sweep_key, "config key to sweep")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep->add_option("--run-root", sweep_root, "parent directory for the runs");
    sweep->add_option("--override", overrides, "key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) {
            decs::Config cfg = load_config(config_path, overrides);
            decs::Trainer trainer(cfg);
            trainer.run(run_dir, resume.empty() ? std::nullopt : std::optional(resume));
        } else if (probe->parsed()) {
            decs::Config cfg = config_path.empty()
                                   ? decs::Config::from_string("seed = 1", "<default>")
                                   : decs::Config::from_file(config_path);
            for (const auto& o : overrides) cfg.apply_override(o);
            return cmd_probe(probe_name, cfg, probe_json);
        } else if (eval->parsed()) {
            std::vector<int> k_list = {1, 2, 4, 8};
            if (!config_path.empty()) k_list = parse_k_list(decs::Config::from_file(config_path));
            write_eval_csv(out_path, summarize_dump(read_dump(dump_path), k_list), k_list);
        } else if (report->parsed()) {
            cmd_report(run_dir);
        } else if (sweep->parsed()) {
            std::vector<std::string> values;
            {
                std::stringstream ss(sweep_values);
                std::string v;
                while (std::getline(ss, v, ',')) values.push_back(v);
            }
            if (values.empty()) throw std::runtime_error("empty sweep value list");
            std::ofstream cmp;
            fs::create_directories(sweep_root);
            cmp.open(fs::path(sweep_root) / "comparison.csv");
            cmp << sweep_key << ",final_accuracy,final_mean_length\n";
            for (const auto& v : values) {
                decs::Config cfg = load_config(config_path, overrides);
                cfg.apply_override(sweep_key + "=" + v);
                const fs::path dir = fs::path(sweep_root) / (sweep_key + "=" + v);
                decs::Trainer trainer(cfg);
                trainer.run(dir.string());
                std::ifstream sum(dir / "summary.csv");
                std::string header, row;
                std::getline(sum, header);
                std::getline(sum, row);
                // summary columns: steps,kappa,R,len,think_len,accuracy,reward
                std::vector<std::string> cols;
                std::stringstream rs(row);
                std::string c;
                while (std::getline(rs, c, ',')) cols.push_back(c);
                cmp << v << "," << (cols.size() > 5 ? cols[5] : "") << ","
                    << (cols.size() > 3 ? cols[3] : "") << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
