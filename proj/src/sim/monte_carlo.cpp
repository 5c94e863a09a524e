#include <cmath>
#include <string>

#include "gridshs/errors.hpp"
#include "gridshs/parallel.hpp"
#include "gridshs/sim.hpp"

namespace gridshs::sim {

void SimConfig::validate(int n) const {
    if (K < 1) throw ConfigError("sim: K must be at least 1");
    if (n_sub < 1) throw ConfigError("sim: n_sub must be at least 1");
    if (replicas < 1) throw ConfigError("sim: replicas must be at least 1");
    if (!(tau > 0.0)) throw ConfigError("sim: tau must be positive");
    if (x0.size() != n || xhat0.size() != n) throw ConfigError("sim: x0/xhat0 must have " + std::to_string(n) + " entries");
    if (forced_path && static_cast<int>(forced_path->size()) != K)
        throw ConfigError("sim: forced path must have K entries");
}

TruthSimulator::TruthSimulator(const Eigen::Ref<const Matrix>& A, const shs::ScenarioSet& set, double tau, int n_sub,
                               std::uint64_t seed)
    : set_(set),
      n_sub_(n_sub),
      h_(tau / n_sub),
      exp_Ah_(numerics::matrix_exponential(A, tau / n_sub)),
      rng_(shs::stream_seed(seed, shs::Stream::noise)),
      xi_(set.channel_count) {}

Vector TruthSimulator::advance(const Vector& x, int alpha, Matrix& dy) {
    const shs::Scenario& s = set_.at(static_cast<std::size_t>(alpha));
    const Eigen::Index r = s.C.rows();
    dy.resize(n_sub_, r);
    const double sqrt_h = std::sqrt(h_);
    Vector xs = x;
    Vector e(r);
    for (int k = 0; k < n_sub_; ++k) {
        // One draw per channel and substep, whichever channels are up.
        for (Eigen::Index c = 0; c < xi_.size(); ++c) xi_(c) = normal_(rng_);
        for (Eigen::Index i = 0; i < r; ++i) e(i) = xi_(set_.noise_column(static_cast<std::size_t>(alpha), static_cast<int>(i)));
        if (r > 0) dy.row(k) = (s.C * xs * h_ + s.sigma * e * sqrt_h).transpose();
        xs = exp_Ah_ * xs;
    }
    return xs;
}

TruthPath simulate_truth(const Eigen::Ref<const Matrix>& A, const shs::ScenarioSet& set, const Vector& x0,
                         const std::vector<int>& path, double tau, int n_sub, std::uint64_t seed) {
    TruthSimulator truth(A, set, tau, n_sub, seed);
    TruthPath out;
    out.states.push_back(x0);
    for (int alpha : path) {
        Matrix dy;
        out.states.push_back(truth.advance(out.states.back(), alpha, dy));
        out.dy.push_back(std::move(dy));
    }
    return out;
}

ReplicaResult run_replica(const observer::CoordinatedObserver& obs, const shs::ScenarioSet& set,
                          const SimConfig& cfg, std::uint64_t replica_index) {
    ReplicaResult res;
    res.seed = shs::replica_seed(cfg.seed, replica_index);
    res.path = cfg.forced_path ? *cfg.forced_path : shs::sample_skeleton(set, cfg.K, res.seed);
    for (int a : res.path)
        if (a < 0 || a >= static_cast<int>(set.size())) throw ConfigError("sim: forced path entry out of range");

    TruthSimulator truth(obs.A, set, cfg.tau, cfg.n_sub, res.seed);
    const observer::Estimator est(obs, cfg.n_sub);
    const int n = obs.n;
    res.err_sq.resize(cfg.K + 1);
    res.state_sq.resize(cfg.K + 1, n);
    Vector x = cfg.x0;
    Vector xhat = cfg.xhat0;
    Matrix dy;
    for (int k = 0;; ++k) {
        const Vector e = xhat - x;
        res.err_sq[k] = e.squaredNorm();
        res.state_sq.row(k) = e.cwiseAbs2().transpose();
        if (k == cfg.K) break;
        const Vector x_next = truth.advance(x, res.path[k], dy);
        xhat = est.step(xhat, res.path[k], dy);
        x = x_next;
    }
    return res;
}

namespace {

// Fixed-shape pairwise tree over replica indices, independent of scheduling.
template <class Get>
Vector pairwise_sum(std::size_t lo, std::size_t hi, const Get& get) {
    if (hi - lo == 1) return get(lo);
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(lo, mid, get) + pairwise_sum(mid, hi, get);
}

}  // namespace

ErrorTrajectory monte_carlo(const observer::CoordinatedObserver& obs, const shs::ScenarioSet& set,
                            const SimConfig& cfg) {
    cfg.validate(obs.n);
    if (std::abs(cfg.tau - obs.tau) > 1e-12 * std::max(1.0, obs.tau))
        throw ConfigError("sim: tau differs from the observer's sampling interval");
    const auto R = static_cast<std::size_t>(cfg.replicas);
    std::vector<ReplicaResult> results(R);
    parallel_for(R, cfg.workers, [&](std::size_t i) { results[i] = run_replica(obs, set, cfg, i); });

    ErrorTrajectory out;
    out.K = cfg.K;
    out.tau = cfg.tau;
    out.replicas = cfg.replicas;
    const auto len = static_cast<Eigen::Index>(cfg.K + 1);
    out.mean_err_sq = pairwise_sum(0, R, [&](std::size_t i) {
                          return Vector(Eigen::Map<const Vector>(results[i].err_sq.data(), len));
                      }) / static_cast<double>(R);
    if (R > 1) {
        out.var_err_sq = pairwise_sum(0, R, [&](std::size_t i) {
                             return Vector((Eigen::Map<const Vector>(results[i].err_sq.data(), len) - out.mean_err_sq)
                                               .cwiseAbs2());
                         }) / static_cast<double>(R - 1);
    } else {
        out.var_err_sq = Vector::Zero(len);
    }
    const Vector flat = pairwise_sum(0, R, [&](std::size_t i) {
                            return Vector(Eigen::Map<const Vector>(results[i].state_sq.data(), results[i].state_sq.size()));
                        }) / static_cast<double>(R);
    out.mean_state_sq = Eigen::Map<const Matrix>(flat.data(), len, obs.n);
    for (ReplicaResult& r : results) {
        out.paths.push_back(std::move(r.path));
        out.seeds.push_back(r.seed);
    }
    return out;
}

}  // namespace gridshs::sim
