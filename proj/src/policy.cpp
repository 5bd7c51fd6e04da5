#include "decs/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace decs {

std::vector<double> softmax(std::span<const double> logits) {
    double mx = logits[0];
    for (double z : logits) mx = std::max(mx, z);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& pi : p) pi /= sum;
    return p;
}

const std::vector<double>& TabularPolicy::zero_row(int n) {
    static std::map<int, std::vector<double>> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::vector<double>(n, 0.0)).first;
    return it->second;
}

const std::vector<double>& TabularPolicy::logits(const Context& ctx) const {
    auto it = table_.find(ctx);
    return it != table_.end() ? it->second : zero_row(vocab_size_);
}

void TabularPolicy::set_logits(const Context& ctx, std::vector<double> row) {
    if (static_cast<int>(row.size()) != vocab_size_)
        throw std::invalid_argument("logit row size mismatch");
    for (double z : row)
        if (!std::isfinite(z)) throw std::invalid_argument("non-finite logit");
    table_[ctx] = std::move(row);
}

void TabularPolicy::add_logit(const Context& ctx, TokenId tok, double delta) {
    auto it = table_.find(ctx);
    if (it == table_.end()) it = table_.emplace(ctx, std::vector<double>(vocab_size_, 0.0)).first;
    it->second[tok] += delta;
}

std::vector<double> TabularPolicy::next_dist(const Context& ctx) const {
    return softmax(logits(ctx));
}

TokenId TabularPolicy::sample_token(const Context& ctx, RngStream& rng) const {
    auto p = next_dist(ctx);
    return rng.categorical(p);
}

void TabularPolicy::pg_update_exact(const TokenAdvantageMap& adv, double centering_tol) {
    // Validate all rows before touching the table.
    std::vector<std::pair<const Context*, std::vector<double>>> deltas;
    for (const auto& [ctx, row] : adv) {
        if (static_cast<int>(row.size()) != vocab_size_)
            throw std::invalid_argument("advantage row size mismatch");
        auto pi = next_dist(ctx);
        double weighted_mean = 0.0;
        for (int t = 0; t < vocab_size_; ++t) {
            if (!std::isfinite(row[t])) throw std::invalid_argument("non-finite advantage");
            weighted_mean += pi[t] * row[t];
        }
        if (std::abs(weighted_mean) > centering_tol)
            throw std::invalid_argument("lemma precondition unmet: advantages not centered");
        std::vector<double> dz(vocab_size_);
        for (int t = 0; t < vocab_size_; ++t) dz[t] = eta_ * pi[t] * row[t];
        deltas.emplace_back(&ctx, std::move(dz));
    }
    for (auto& [ctx, dz] : deltas)
        for (int t = 0; t < vocab_size_; ++t)
            if (dz[t] != 0.0) add_logit(*ctx, t, dz[t]);
}

void TabularPolicy::ppo_update(const std::vector<PpoSample>& batch, double clip_eps) {
    if (clip_eps <= 0.0) throw std::invalid_argument("clip ratio must be positive");
    if (batch.empty()) throw std::invalid_argument("empty ppo batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    // Accumulate the full surrogate gradient against the pre-update policy,
    // then apply one ascent step.
    std::map<Context, std::vector<double>> grad;
    for (const auto& s : batch) {
        if (s.old_prob <= 0.0) throw std::invalid_argument("old_prob must be positive");
        if (!std::isfinite(s.advantage)) throw std::invalid_argument("non-finite advantage");
        auto pi = next_dist(s.ctx);
        const double ratio = pi[s.token] / s.old_prob;
        const bool clipped = (s.advantage > 0.0 && ratio > 1.0 + clip_eps) ||
                             (s.advantage < 0.0 && ratio < 1.0 - clip_eps);
        if (clipped) continue;
        auto it = grad.find(s.ctx);
        if (it == grad.end()) it = grad.emplace(s.ctx, std::vector<double>(vocab_size_, 0.0)).first;
        // d(ratio * A)/dz_b = (A / old_prob) * pi_t * (delta_tb - pi_b)
        const double scale = inv_n * s.advantage / s.old_prob * pi[s.token];
        for (int b = 0; b < vocab_size_; ++b)
            it->second[b] += scale * ((b == s.token ? 1.0 : 0.0) - pi[b]);
    }
    for (const auto& [ctx, g] : grad)
        for (int b = 0; b < vocab_size_; ++b)
            if (g[b] != 0.0) add_logit(ctx, b, eta_ * g[b]);
}

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

void TabularPolicy::save(std::ostream& out) const {
    out << "decs-policy v1 vocab=" << vocab_size_ << " order=" << order_ << "\n";
    for (const auto& [ctx, row] : table_) {
        out << ctx.prompt_class << '\t';
        if (ctx.suffix.empty()) {
            out << '-';
        } else {
            for (size_t i = 0; i < ctx.suffix.size(); ++i) {
                if (i) out << ',';
                out << ctx.suffix[i];
            }
        }
        out << '\t';
        for (int t = 0; t < vocab_size_; ++t) {
            if (t) out << ',';
            out << fmt_double(row[t]);
        }
        out << '\n';
    }
}

TabularPolicy TabularPolicy::load(std::istream& in, double learning_rate) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty policy file");
    int vocab = 0, order = 0;
    if (std::sscanf(header.c_str(), "decs-policy v1 vocab=%d order=%d", &vocab, &order) != 2)
        throw std::runtime_error("bad policy header: " + header);
    TabularPolicy policy(vocab, order, learning_rate);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cls, suffix, logits;
        if (!std::getline(ls, cls, '\t') || !std::getline(ls, suffix, '\t') ||
            !std::getline(ls, logits))
            throw std::runtime_error("bad policy row: " + line);
        Context ctx;
        ctx.prompt_class = std::stoi(cls);
        if (suffix != "-") {
            std::istringstream ss(suffix);
            std::string tok;
            while (std::getline(ss, tok, ',')) ctx.suffix.push_back(std::stoi(tok));
        }
        std::vector<double> row;
        std::istringstream zs(logits);
        std::string z;
        while (std::getline(zs, z, ',')) row.push_back(std::stod(z));
        policy.set_logits(ctx, std::move(row));
    }
    return policy;
}

void TabularPolicy::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    save(out);
}

TabularPolicy TabularPolicy::load_file(const std::string& path, double learning_rate) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return load(in, learning_rate);
}

}  // namespace decs
