#include "decs/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace decs {

const std::map<std::string, std::string>& Config::known_keys() {
    static const std::map<std::string, std::string> keys = {
        {"seed", ""},  // mandatory, no default
        {"env.classes", "2"},
        {"env.answer_tokens", "2"},
        {"env.high_entropy_tokens", "1"},
        {"env.filler_tokens", "1"},
        {"env.context_order", "2"},
        {"env.t_max", "48"},
        {"env.difficulty_mix", "0.5,0.5"},
        {"env.difficulty", "0.2,0.6"},
        {"env.init_bias_answer", "1.6"},
        {"env.init_bias_think_end", "-1.0"},
        {"policy.learning_rate", "2.0e-6"},
        {"reward.mode", "decoupled"},  // decoupled | length | correctness
        {"reward.gamma", "0.001"},
        {"reward.r_plus", "1.1"},
        {"reward.r_zero", "1.0"},
        {"reward.nrp_granularity", "token"},  // token | chunk
        {"reward.l_denominator", "full"},     // full | thinking
        {"advantage.estimator", "decs"},      // grpo | decs | rpp
        {"trainer.batch_size", "8"},
        {"trainer.group_size", "16"},
        {"trainer.clip_eps", "0.2"},
        {"trainer.steps", "100"},
        {"trainer.beta", "0.2"},
        {"trainer.curriculum", "on"},  // on | off
        {"trainer.resample_budget", "8"},
        {"trainer.checkpoint_every", "100"},
        {"eval.samples_per_prompt", "16"},
        {"eval.k_list", "1,2,4,8"},
        {"judge.endpoint", ""},  // empty -> oracle judge
        {"judge.timeout_ms", "1000"},
        {"probe.trials", "100"},
        {"probe.group_size", "3"},
        {"probe.t_max", "6"},
        {"probe.gamma", "0.001"},
    };
    return keys;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!known_keys().count(key))
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unknown key `" +
                                     key + "`");
        cfg.values_[key] = value;
    }
    cfg.validate();
    return cfg;
}

void Config::validate() const {
    if (!values_.count("seed") || values_.at("seed").empty())
        throw std::runtime_error("config is missing required key `seed`");
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("override must be key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    if (!known_keys().count(key)) throw std::runtime_error("unknown key `" + key + "`");
    values_[key] = assignment.substr(eq + 1);
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    auto def = known_keys().find(key);
    if (def == known_keys().end()) throw std::runtime_error("unknown key `" + key + "`");
    return def->second;
}

int64_t Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        const int64_t x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("key `" + key + "`: not an integer: " + v);
    }
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("key `" + key + "`: not a number: " + v);
    }
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream ss(get_string(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_string_list(key)) {
        try {
            out.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw std::runtime_error("key `" + key + "`: not a number list");
        }
    }
    return out;
}

uint64_t Config::seed() const { return static_cast<uint64_t>(get_int("seed")); }

std::string Config::snapshot() const {
    std::ostringstream out;
    for (const auto& [key, def] : known_keys()) {
        auto it = values_.find(key);
        const std::string v = it != values_.end() ? it->second : def;
        out << key << " = " << v << "\n";
    }
    return out.str();
}

}  // namespace decs
