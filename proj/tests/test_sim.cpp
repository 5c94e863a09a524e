#include <cmath>

#include <doctest.h>

#include "gridshs/errors.hpp"
#include "gridshs/sim.hpp"
#include "support.hpp"

using namespace gridshs;

namespace {

sim::SimConfig config(int K, int replicas, std::uint64_t seed = 42) {
    sim::SimConfig cfg;
    cfg.x0 = Vector::Zero(4);
    cfg.xhat0 = Vector(4);
    cfg.xhat0 << 2, 0, 1, 0;
    cfg.K = K;
    cfg.tau = 0.6261;
    cfg.n_sub = 32;
    cfg.replicas = replicas;
    cfg.seed = seed;
    return cfg;
}

analysis::ObserverSpec spec_with_sigma(double scale) {
    auto spec = testing::five_bus_spec();
    for (auto& s : spec.set.scenarios) s.sigma *= scale;
    return spec;
}

}  // namespace

TEST_CASE("monte carlo is deterministic and independent of the worker count") {
    const auto spec = testing::five_bus_spec();
    const auto design = analysis::design_observer(spec);
    auto cfg = config(10, 37);
    const auto a = sim::monte_carlo(design.obs, spec.set, cfg);
    const auto b = sim::monte_carlo(design.obs, spec.set, cfg);
    cfg.workers = 5;
    const auto c = sim::monte_carlo(design.obs, spec.set, cfg);
    CHECK(a.mean_err_sq == b.mean_err_sq);
    CHECK(a.mean_err_sq == c.mean_err_sq);
    CHECK(a.var_err_sq == c.var_err_sq);
    CHECK(a.mean_state_sq == c.mean_state_sq);
    CHECK(a.paths == c.paths);
    CHECK(a.seeds == c.seeds);
    cfg.seed = 43;
    CHECK(sim::monte_carlo(design.obs, spec.set, cfg).mean_err_sq != a.mean_err_sq);
}

TEST_CASE("the reduction matches a plain average and per-state sums") {
    const auto spec = testing::five_bus_spec();
    const auto design = analysis::design_observer(spec);
    const auto cfg = config(6, 9);
    const auto traj = sim::monte_carlo(design.obs, spec.set, cfg);
    Vector mean = Vector::Zero(7), sq = Vector::Zero(7);
    for (int i = 0; i < 9; ++i) {
        const auto r = sim::run_replica(design.obs, spec.set, cfg, i);
        for (int k = 0; k < 7; ++k) {
            mean(k) += r.err_sq[k] / 9;
            sq(k) += r.err_sq[k] * r.err_sq[k];
            CHECK(r.state_sq.row(k).sum() == doctest::Approx(r.err_sq[k]).epsilon(1e-12));
        }
    }
    CHECK((traj.mean_err_sq - mean).cwiseAbs().maxCoeff() <= 1e-12 * mean.maxCoeff());
    const Vector var = (sq - 9 * mean.cwiseAbs2()) / 8;
    CHECK((traj.var_err_sq - var).cwiseAbs().maxCoeff() <= 1e-9 * (1 + var.maxCoeff()));
    CHECK(traj.mean_state_sq.rowwise().sum().isApprox(traj.mean_err_sq, 1e-12));
}

TEST_CASE("a single replica reproduces run_replica") {
    const auto spec = testing::five_bus_spec();
    const auto design = analysis::design_observer(spec);
    const auto cfg = config(8, 1);
    const auto traj = sim::monte_carlo(design.obs, spec.set, cfg);
    const auto r = sim::run_replica(design.obs, spec.set, cfg, 0);
    for (int k = 0; k <= 8; ++k) CHECK(traj.mean_err_sq(k) == r.err_sq[k]);
    CHECK(traj.var_err_sq.isZero(0.0));
    CHECK(traj.seeds[0] == shs::replica_seed(cfg.seed, 0));
}

TEST_CASE("switching paths do not depend on the measurement noise") {
    const auto noisy = spec_with_sigma(1.0), quiet = spec_with_sigma(0.0);
    const auto dn = analysis::design_observer(noisy), dq = analysis::design_observer(quiet);
    const auto cfg = config(40, 5);
    for (int i = 0; i < 5; ++i)
        CHECK(sim::run_replica(dn.obs, noisy.set, cfg, i).path == sim::run_replica(dq.obs, quiet.set, cfg, i).path);
}

TEST_CASE("noise draws on a channel do not depend on the active scenario") {
    const auto set = testing::angle_sensors(0.99, 0.995, 0.01, 0.01, {});
    const Matrix A = testing::five_bus_A();
    sim::TruthSimulator both(A, set, 0.6, 16, 3), first(A, set, 0.6, 16, 3), second(A, set, 0.6, 16, 3);
    const Vector x = Vector::Zero(4);
    Matrix d_both, d_first, d_second;
    both.advance(x, 0, d_both);
    first.advance(x, 1, d_first);
    second.advance(x, 2, d_second);
    CHECK(d_both.col(0) == d_first.col(0));
    CHECK(d_both.col(1) == d_second.col(0));
    Matrix d_none;
    sim::TruthSimulator none(A, set, 0.6, 16, 3);
    none.advance(x, 3, d_none);
    CHECK(d_none.rows() == 16);
    CHECK(d_none.cols() == 0);
    // the stream stays aligned after an all-down interval
    Matrix next_none, next_both;
    none.advance(x, 0, next_none);
    both.advance(x, 0, next_both);
    CHECK(next_none == next_both);
}

TEST_CASE("measurement increments have Brownian variance") {
    const auto set = testing::angle_sensors(0.99, 0.995, 0.03, 0.05, {});
    const Matrix A = testing::five_bus_A();
    const int R = 10000;
    const double tau = 0.5;
    double s1 = 0.0, s2 = 0.0, cross = 0.0;
    for (int i = 0; i < R; ++i) {
        sim::TruthSimulator truth(A, set, tau, 8, shs::replica_seed(77, i));
        Matrix dy;
        truth.advance(Vector::Zero(4), 0, dy);
        const double y1 = dy.col(0).sum(), y2 = dy.col(1).sum();
        s1 += y1 * y1;
        s2 += y2 * y2;
        cross += y1 * y2;
    }
    CHECK(s1 / R == doctest::Approx(0.03 * 0.03 * tau).epsilon(0.05));
    CHECK(s2 / R == doctest::Approx(0.05 * 0.05 * tau).epsilon(0.05));
    CHECK(std::abs(cross / R) < 0.05 * 0.03 * 0.05 * tau);
}

TEST_CASE("truth propagation is exact between sampling instants") {
    const auto set = testing::angle_sensors(0.99, 0.995);
    const Matrix A = testing::five_bus_A();
    Vector x0(4);
    x0 << 0.1, -0.2, 0.05, 0.3;
    const auto path = sim::simulate_truth(A, set, x0, {0, 1, 2, 3}, 0.4, 16, 9);
    for (int k = 0; k < 4; ++k) {
        const Vector expected = numerics::matrix_exponential(A, 0.4 * (k + 1)) * x0;
        CHECK((path.states[k + 1] - expected).norm() <= 1e-10 * (1 + expected.norm()));
    }
}

TEST_CASE("zero error and zero noise stay at zero") {
    const auto spec = spec_with_sigma(0.0);
    const auto design = analysis::design_observer(spec);
    auto cfg = config(20, 4);
    cfg.x0 << 0.1, 0, -0.1, 0;
    cfg.xhat0 = cfg.x0;
    const auto traj = sim::monte_carlo(design.obs, spec.set, cfg);
    CHECK(traj.mean_err_sq.maxCoeff() <= 1e-16);
}

TEST_CASE("an all-down path propagates the error open loop") {
    const auto spec = testing::five_bus_spec();
    const auto design = analysis::design_observer(spec);
    auto cfg = config(6, 1);
    cfg.forced_path = std::vector<int>(6, 3);
    const auto r = sim::run_replica(design.obs, spec.set, cfg, 0);
    CHECK(r.path == *cfg.forced_path);
    for (int k = 0; k <= 6; ++k) {
        const Vector e = numerics::matrix_exponential(spec.A, cfg.tau * k) * cfg.xhat0;
        CHECK(r.err_sq[k] == doctest::Approx(e.squaredNorm()).epsilon(1e-9));
    }
}

TEST_CASE("refining the filter substep changes the error statistics little") {
    const auto spec = testing::five_bus_spec();
    const auto design = analysis::design_observer(spec);
    auto cfg = config(15, 400);
    cfg.workers = 4;
    const auto coarse = sim::monte_carlo(design.obs, spec.set, cfg);
    cfg.n_sub = 64;
    const auto fine = sim::monte_carlo(design.obs, spec.set, cfg);
    for (int k : {1, 5, 15}) CHECK(coarse.mean_err_sq(k) == doctest::Approx(fine.mean_err_sq(k)).epsilon(0.1));
}

TEST_CASE("configuration validation") {
    const auto spec = testing::five_bus_spec();
    const auto design = analysis::design_observer(spec);
    auto cfg = config(5, 2);
    cfg.tau = 0.5;
    CHECK_THROWS_AS(sim::monte_carlo(design.obs, spec.set, cfg), ConfigError);
    cfg = config(5, 2);
    cfg.K = 0;
    CHECK_THROWS_AS(sim::monte_carlo(design.obs, spec.set, cfg), ConfigError);
    cfg = config(5, 2);
    cfg.x0 = Vector::Zero(3);
    CHECK_THROWS_AS(sim::monte_carlo(design.obs, spec.set, cfg), ConfigError);
    cfg = config(5, 2);
    cfg.forced_path = std::vector<int>{0, 1};
    CHECK_THROWS_AS(sim::monte_carlo(design.obs, spec.set, cfg), ConfigError);
    cfg.forced_path = std::vector<int>{0, 1, 9, 0, 0};
    CHECK_THROWS_AS(sim::monte_carlo(design.obs, spec.set, cfg), ConfigError);
}
