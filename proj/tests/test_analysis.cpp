#include <cmath>
#include <limits>

#include <doctest.h>

#include "gridshs/errors.hpp"
#include "support.hpp"

using namespace gridshs;

namespace {

double svd_norm(const Matrix& M) { return Eigen::JacobiSVD<Matrix>(M).singularValues()(0); }

analysis::ObserverSpec with_sigma(analysis::ObserverSpec spec, double scale) {
    for (auto& s : spec.set.scenarios) s.sigma *= scale;
    return spec;
}

}  // namespace

TEST_CASE("interval variance of a scalar filter has the closed form") {
    for (double a : {0.5, 3.0, 12.0}) {
        Matrix Ac(1, 1), L(1, 1), S(1, 1);
        Ac << -a;
        L << 1.7;
        S << 0.02;
        const double tau = 0.6;
        const auto iv = analysis::interval_variance(Ac, L, S, tau);
        const double expected = 1.7 * 1.7 * 0.02 * 0.02 * (1 - std::exp(-2 * a * tau)) / (2 * a);
        CHECK(iv.V(0, 0) == doctest::Approx(expected).epsilon(1e-10));
        CHECK(iv.Q(0, 0) == doctest::Approx(std::sqrt(expected)).epsilon(1e-8));
        S.setZero();
        CHECK(analysis::interval_variance(Ac, L, S, tau).V.norm() == 0.0);
    }
    CHECK_THROWS_AS(analysis::interval_variance(Matrix::Identity(2, 2), Matrix::Ones(1, 1), Matrix::Ones(1, 1), 1.0),
                    ModelError);
}

TEST_CASE("contraction constants agree with direct evaluation") {
    const auto design = analysis::design_observer(testing::five_bus_spec());
    const auto& obs = design.obs;
    const auto rep = analysis::contraction(obs);
    double gamma = 0.0;
    Matrix M = Matrix::Zero(4, 4);
    for (std::size_t j = 0; j < obs.Lambda.size(); ++j) {
        gamma += obs.probabilities[j] * svd_norm(obs.Lambda[j]);
        M += obs.probabilities[j] * obs.Lambda[j].transpose() * obs.Lambda[j];
    }
    CHECK(rep.gamma_exact == doctest::Approx(gamma).epsilon(1e-9));
    const double rho = Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().maxCoeff();
    CHECK(rep.rho_M == doctest::Approx(rho).epsilon(1e-9));
    CHECK(rep.stable == (rho < 1.0));
    // (E norm)^2 <= E norm^2, which also bounds rho(M)
    double second = 0.0;
    for (std::size_t j = 0; j < obs.Lambda.size(); ++j) second += obs.probabilities[j] * std::pow(svd_norm(obs.Lambda[j]), 2);
    CHECK(rep.rho_M <= second * (1 + 1e-12));
    CHECK(gamma * gamma <= second * (1 + 1e-12));
}

TEST_CASE("h starts at one and stays there without dynamics") {
    const auto design = analysis::design_observer(
        testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, 0.99, 0.995, observer::Recombination::stacked));
    const auto& obs = design.obs;
    CHECK(analysis::h_function(obs.A, obs.F, obs.Phi, 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    const Matrix Z = Matrix::Zero(4, 4);
    for (double t : {0.1, 1.0, 50.0}) CHECK(analysis::h_function(Z, obs.F, obs.Phi, t) == doctest::Approx(1.0).epsilon(1e-10));

    auto decomps = obs.decomps;
    const auto tm = analysis::compute_tau_max(Z, decomps, 5.0, 1e-2);
    CHECK(tm.unbounded);
}

TEST_CASE("tau_max is the first crossing of the sufficient condition") {
    const auto design = analysis::design_observer(
        testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, 0.99, 0.995, observer::Recombination::stacked));
    const auto& obs = design.obs;
    const auto tm = analysis::compute_tau_max(obs.A, obs.decomps);
    REQUIRE_FALSE(tm.unbounded);
    double q = 0.0;
    for (double p : obs.probabilities) q = std::max(q, 1.0 - p);
    CHECK(tm.q_max == doctest::Approx(q).epsilon(1e-15));
    CHECK(tm.value > 0.0);
    for (int k = 1; k <= 20; ++k) {
        const double t = tm.value * k / 20.0;
        CHECK(q * analysis::h_function(obs.A, obs.F, obs.Phi, t) < 1.0);
    }
    CHECK(q * analysis::h_function(obs.A, obs.F, obs.Phi, tm.value * (1 + 1e-6) + 1e-12) >= 1.0 - 1e-9);

    // the block-scaled bound stays below one inside the window
    auto spec = testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, 0.99, 0.995, observer::Recombination::stacked);
    spec.tau = 0.5 * tm.value;
    const auto inside = analysis::design_observer(spec);
    CHECK(analysis::contraction(inside.obs).gamma2 < 1.0);
}

TEST_CASE("steady-state variance matches the covariance recursion") {
    const auto design = analysis::design_observer(testing::five_bus_spec());
    const auto& obs = design.obs;
    const auto ss = analysis::steady_state(obs);
    CHECK(ss.residual < 1e-10);
    // fixed-point iteration of W <- S W S + Psi from zero
    Matrix W = Matrix::Zero(4, 4);
    for (int k = 0; k < 5000; ++k) W = ss.S * W * ss.S + ss.Psi;
    CHECK((W - ss.W_inf).norm() <= 1e-8 * (1 + W.norm()));
    CHECK(ss.mu_inf == doctest::Approx(W.trace()).epsilon(1e-8));
    CHECK(ss.mu_state == doctest::Approx(ss.mu_inf).epsilon(1e-12));  // identity readout
    CHECK((ss.S * ss.S - ss.M).norm() < 1e-10);
    CHECK(ss.mu_inf > 0.0);
}

TEST_CASE("zero noise gives zero steady-state variance") {
    for (auto mode : {observer::Recombination::active, observer::Recombination::stacked}) {
        auto spec = with_sigma(testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, 0.99, 0.995, mode), 0.0);
        const auto design = analysis::design_observer(spec);
        if (!analysis::contraction(design.obs).stable) continue;
        CHECK(analysis::steady_state(design.obs).mu_inf == doctest::Approx(0.0));
    }
    const auto spec = with_sigma(testing::five_bus_spec(), 0.0);
    const auto rows = analysis::tradeoff_sweep(spec, {1.0, 2.0});
    for (const auto& r : rows)
        if (r.stable) CHECK(r.mu_inf == doctest::Approx(0.0));
}

TEST_CASE("steady-state variance scales with the noise power") {
    const auto base = analysis::steady_state(analysis::design_observer(testing::five_bus_spec()).obs);
    const auto doubled =
        analysis::steady_state(analysis::design_observer(with_sigma(testing::five_bus_spec(), 2.0)).obs);
    CHECK(doubled.mu_inf == doctest::Approx(4.0 * base.mu_inf).epsilon(1e-8));
}

TEST_CASE("faster poles trade contraction for noise") {
    const auto rows = analysis::tradeoff_sweep(testing::five_bus_spec(), {1.0, 2.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].gamma_exact < rows[0].gamma_exact);
    REQUIRE(rows[0].stable);
    REQUIRE(rows[1].stable);
    CHECK(rows[1].mu_inf > rows[0].mu_inf);
}

TEST_CASE("more reliable delivery contracts faster") {
    double prev = std::numeric_limits<double>::infinity();
    for (double rho : {0.8, 0.9, 0.95, 0.99, 0.999}) {
        const auto design = analysis::design_observer(testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, rho, rho));
        const double g = analysis::contraction(design.obs).gamma_exact;
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("unstable designs have no steady state") {
    const auto design = analysis::design_observer(testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, 0.8, 0.8));
    REQUIRE_FALSE(analysis::contraction(design.obs).stable);
    CHECK_THROWS_AS(analysis::steady_state(design.obs), NumericalError);
    const auto rows = analysis::tradeoff_sweep(testing::five_bus_spec({-4.8, -3.6, -4, -4.4}, 0.8, 0.8), {1.0});
    CHECK(std::isnan(rows[0].mu_inf));
}
