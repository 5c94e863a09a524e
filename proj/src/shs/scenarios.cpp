#include <cmath>
#include <random>
#include <string>

#include "gridshs/errors.hpp"
#include "gridshs/shs.hpp"

namespace gridshs::shs {

std::size_t ScenarioSet::position_of(int index) const {
    for (std::size_t i = 0; i < scenarios.size(); ++i)
        if (scenarios[i].index == index) return i;
    throw ModelError("scenario " + std::to_string(index) + " is not in the set");
}

int ScenarioSet::noise_column(std::size_t pos, int row) const {
    const Scenario& s = scenarios.at(pos);
    if (static_cast<Eigen::Index>(s.channels.size()) == s.C.rows()) return s.channels[row];
    return row;
}

ScenarioSet make_set(std::vector<Scenario> scenarios, int n) {
    ScenarioSet set;
    set.n = n;
    double total = 0.0;
    for (const Scenario& s : scenarios) {
        if (s.C.cols() != n && s.C.rows() > 0) throw ModelError("scenario C has the wrong number of columns");
        if (s.sigma.rows() != s.C.rows() || s.sigma.cols() != s.C.rows())
            throw ModelError("scenario sigma must be r x r");
        if (!(s.probability > 0.0)) throw ModelError("scenario probabilities must be positive");
        total += s.probability;
        set.channel_count = std::max<int>(set.channel_count, static_cast<int>(s.C.rows()));
        for (int c : s.channels) set.channel_count = std::max(set.channel_count, c + 1);
    }
    if (std::abs(total - 1.0) > 1e-12) throw ModelError("scenario probabilities do not sum to 1");
    set.scenarios = std::move(scenarios);
    return set;
}

ScenarioSet scenarios_from_channels(const std::vector<SensorChannel>& channels, const SigmaOverrides& overrides) {
    const int c = static_cast<int>(channels.size());
    if (c < 1) throw ModelError("at least one sensor channel is required");
    if (c > 16) throw ModelError("more than 16 channels (2^c scenarios) is not supported");
    const Eigen::Index n = channels.front().row.size();
    for (const SensorChannel& ch : channels) {
        if (ch.row.size() != n) throw ModelError("channel '" + ch.name + "' has an inconsistent state dimension");
        if (!(ch.rho > 0.0 && ch.rho <= 1.0)) throw ModelError("channel '" + ch.name + "': rho must lie in (0, 1]");
        if (!(ch.sigma >= 0.0)) throw ModelError("channel '" + ch.name + "': sigma must be non-negative");
        if (ch.row.isZero(0.0)) throw ModelError("channel '" + ch.name + "': selector row is zero");
    }
    for (const auto& [idx, _] : overrides)
        if (idx < 1 || idx > (1 << c)) throw ModelError("sigma override for unknown scenario " + std::to_string(idx));

    ScenarioSet set;
    set.n = static_cast<int>(n);
    set.channel_count = c;
    const unsigned full = (1u << c) - 1u;
    for (unsigned t = 0; t <= full; ++t) {
        const unsigned mask = full - t;  // channel k up <=> bit (c-1-k) set; all-up first
        Scenario s;
        s.index = static_cast<int>(t) + 1;
        double p = 1.0;
        for (int k = 0; k < c; ++k) {
            const bool up = (mask >> (c - 1 - k)) & 1u;
            p *= up ? channels[k].rho : (1.0 - channels[k].rho);
            if (up) s.channels.push_back(k);
        }
        s.probability = p;
        const auto r = static_cast<Eigen::Index>(s.channels.size());
        s.C = Matrix::Zero(r, n);
        s.sigma = Matrix::Zero(r, r);
        for (Eigen::Index i = 0; i < r; ++i) {
            s.C.row(i) = channels[s.channels[i]].row;
            s.sigma(i, i) = channels[s.channels[i]].sigma;
        }
        if (auto it = overrides.find(s.index); it != overrides.end()) {
            const auto& v = it->second;
            if (v.size() != 1 && static_cast<Eigen::Index>(v.size()) != r)
                throw ModelError("sigma override for scenario " + std::to_string(s.index) + " has the wrong length");
            for (Eigen::Index i = 0; i < r; ++i) s.sigma(i, i) = v.size() == 1 ? v[0] : v[i];
        }
        if (p > 0.0) set.scenarios.push_back(std::move(s));
    }
    return set;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) {
    return mix64(master + (replica + 1) * 0x9E3779B97F4A7C15ull);
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(stream)));
}

std::vector<int> sample_skeleton(const ScenarioSet& set, int K, std::uint64_t seed) {
    if (K < 1) throw ModelError("sample_skeleton: horizon must be at least 1");
    if (set.scenarios.empty()) throw ModelError("sample_skeleton: empty scenario set");
    std::vector<double> cdf;
    double acc = 0.0;
    for (const Scenario& s : set.scenarios) cdf.push_back(acc += s.probability);

    std::mt19937_64 rng(stream_seed(seed, Stream::switching));
    std::uniform_real_distribution<double> u(0.0, acc);
    std::vector<int> path(K);
    for (int k = 0; k < K; ++k) {
        const double x = u(rng);
        int pos = 0;
        while (pos + 1 < static_cast<int>(cdf.size()) && x >= cdf[pos]) ++pos;
        path[k] = pos;
    }
    return path;
}

}  // namespace gridshs::shs
