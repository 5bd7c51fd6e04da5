#include "decs/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace decs {

Estimator parse_estimator(const std::string& name) {
    if (name == "grpo") return Estimator::grpo;
    if (name == "decs") return Estimator::decs;
    if (name == "rpp") return Estimator::rpp;
    throw std::invalid_argument("unknown advantage estimator: " + name);
}

std::vector<double> grpo_advantage(std::span<const double> rewards) {
    const size_t g = rewards.size();
    if (g < 2) throw std::invalid_argument("grpo needs a group of at least 2");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(g);
    const double sd = std::sqrt(var);
    std::vector<double> adv(g, 0.0);
    if (sd > 0.0)
        for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

AdvantageMatrix decs_advantage(const TokenRewardMatrix& rewards) {
    const int g = rewards.rows();
    const int l = rewards.cols();
    if (g < 2) throw std::invalid_argument("decs advantage needs a group of at least 2");
    for (const auto& row : rewards.values)
        if (static_cast<int>(row.size()) != l)
            throw std::invalid_argument("ragged reward matrix");

    AdvantageMatrix adv;
    adv.tag = Estimator::decs;
    adv.lengths = rewards.lengths;
    adv.values.assign(g, std::vector<double>(l, 0.0));
    for (int j = 0; j < l; ++j) {
        double mean = 0.0;
        for (int i = 0; i < g; ++i) mean += rewards.values[i][j];
        mean /= g;
        double var = 0.0;
        for (int i = 0; i < g; ++i) {
            const double d = rewards.values[i][j] - mean;
            var += d * d;
        }
        var /= g;
        const double sd = std::sqrt(var);
        if (sd > 0.0)
            for (int i = 0; i < g; ++i) adv.values[i][j] = (rewards.values[i][j] - mean) / sd;
    }
    return adv;
}

std::vector<AdvantageMatrix> rpp_advantage(const std::vector<TokenRewardMatrix>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty rpp batch");

    // Stage 1: per-position group-mean subtraction within each group.
    std::vector<AdvantageMatrix> out;
    out.reserve(batch.size());
    for (const auto& m : batch) {
        AdvantageMatrix a;
        a.tag = Estimator::rpp;
        a.lengths = m.lengths;
        a.values.assign(m.rows(), std::vector<double>(m.cols(), 0.0));
        for (int j = 0; j < m.cols(); ++j) {
            double mean = 0.0;
            for (int i = 0; i < m.rows(); ++i) mean += m.values[i][j];
            mean /= m.rows();
            for (int i = 0; i < m.rows(); ++i) a.values[i][j] = m.values[i][j] - mean;
        }
        out.push_back(std::move(a));
    }

    // Stage 2: whiten by batch-global token moments over non-pad positions.
    long n = 0;
    double sum = 0.0;
    for (const auto& a : out)
        for (int i = 0; i < static_cast<int>(a.values.size()); ++i)
            for (int j = 0; j < a.lengths[i]; ++j) {
                sum += a.values[i][j];
                ++n;
            }
    if (n < 2) throw std::invalid_argument("rpp needs at least 2 unpadded tokens batch-wide");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& a : out)
        for (int i = 0; i < static_cast<int>(a.values.size()); ++i)
            for (int j = 0; j < a.lengths[i]; ++j) {
                const double d = a.values[i][j] - mean;
                ss += d * d;
            }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    for (auto& a : out)
        for (auto& row : a.values)
            for (double& x : row) x = sd > 0.0 ? (x - mean) / sd : 0.0;
    return out;
}

}  // namespace decs
