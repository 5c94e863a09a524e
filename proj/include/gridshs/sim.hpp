#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gridshs/observer.hpp"

namespace gridshs::sim {

struct SimConfig {
    Vector x0;     // true initial state deviation
    Vector xhat0;  // initial estimate
    int K = 30;    // intervals
    double tau = 0.0;
    int n_sub = 64;
    int replicas = 1;
    std::uint64_t seed = 0;
    int workers = 1;
    std::optional<std::vector<int>> forced_path;  // scenario positions, overrides sampling

    void validate(int n) const;
};

// Exact state propagation with measurement increments drawn on the noise stream.
class TruthSimulator {
  public:
    TruthSimulator(const Eigen::Ref<const Matrix>& A, const shs::ScenarioSet& set, double tau, int n_sub,
                   std::uint64_t seed);

    // Advances x across one interval under scenario position `alpha`; dy receives n_sub x r increments.
    Vector advance(const Vector& x, int alpha, Matrix& dy);

  private:
    const shs::ScenarioSet& set_;
    int n_sub_;
    double h_;
    Matrix exp_Ah_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    Vector xi_;
};

struct TruthPath {
    std::vector<Vector> states;  // K+1 interval-boundary states
    std::vector<Matrix> dy;      // K blocks of n_sub x r_alpha increments
};

TruthPath simulate_truth(const Eigen::Ref<const Matrix>& A, const shs::ScenarioSet& set, const Vector& x0,
                         const std::vector<int>& path, double tau, int n_sub, std::uint64_t seed);

struct ReplicaResult {
    std::uint64_t seed = 0;
    std::vector<int> path;        // scenario positions per interval
    std::vector<double> err_sq;   // K+1 values of ||x_hat_k - x_k||^2
    Matrix state_sq;              // (K+1) x n squared per-state errors
};

ReplicaResult run_replica(const observer::CoordinatedObserver& obs, const shs::ScenarioSet& set,
                          const SimConfig& cfg, std::uint64_t replica_index);

struct ErrorTrajectory {
    int K = 0;
    double tau = 0.0;
    int replicas = 0;
    Vector mean_err_sq;  // K+1
    Vector var_err_sq;   // K+1, sample variance across replicas (0 for a single replica)
    Matrix mean_state_sq;  // (K+1) x n
    std::vector<std::vector<int>> paths;
    std::vector<std::uint64_t> seeds;
};

ErrorTrajectory monte_carlo(const observer::CoordinatedObserver& obs, const shs::ScenarioSet& set,
                            const SimConfig& cfg);

}  // namespace gridshs::sim
