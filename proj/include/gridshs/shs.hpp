#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridshs/numerics.hpp"

namespace gridshs::shs {

struct SensorChannel {
    std::string name;
    Eigen::RowVectorXd row;  // contribution to C
    double rho = 1.0;        // packet delivery ratio
    double sigma = 0.0;      // Brownian diffusion coefficient of the measurement noise
};

struct Scenario {
    int index = 0;              // 1-based label in enumeration order (all channels up is 1)
    Matrix C;                   // r x n, rows of the up channels in declaration order
    Matrix sigma;               // r x r diagonal
    double probability = 0.0;
    std::vector<int> channels;  // 0-based channel positions of the rows of C
};

struct ScenarioSet {
    std::vector<Scenario> scenarios;
    int n = 0;
    int channel_count = 0;  // width of the per-substep noise draw

    std::size_t size() const { return scenarios.size(); }
    const Scenario& at(std::size_t pos) const { return scenarios.at(pos); }
    // Position of the scenario labelled `index`; throws if absent.
    std::size_t position_of(int index) const;
    // Noise column feeding row `row` of scenario at `pos`.
    int noise_column(std::size_t pos, int row) const;
};

// Per-scenario sigma overrides keyed by 1-based enumeration index; one value broadcasts over rows.
using SigmaOverrides = std::map<int, std::vector<double>>;

ScenarioSet scenarios_from_channels(const std::vector<SensorChannel>& channels,
                                    const SigmaOverrides& overrides = {});

// Builds a set from explicit scenarios (probabilities must sum to 1).
ScenarioSet make_set(std::vector<Scenario> scenarios, int n);

// Positions into set.scenarios, i.i.d. with the scenario probabilities.
std::vector<int> sample_skeleton(const ScenarioSet& set, int K, std::uint64_t seed);

// ---- seeding ----

std::uint64_t mix64(std::uint64_t x);  // splitmix64 finalizer
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica);

enum class Stream : std::uint64_t { switching = 1, noise = 2 };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

}  // namespace gridshs::shs
