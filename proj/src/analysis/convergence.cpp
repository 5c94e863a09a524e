#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "gridshs/analysis.hpp"
#include "gridshs/errors.hpp"

namespace gridshs::analysis {

IntervalVariance interval_variance(const Eigen::Ref<const Matrix>& Ac, const Eigen::Ref<const Matrix>& L,
                                   const Eigen::Ref<const Matrix>& sigma, double tau) {
    if (L.rows() != Ac.rows() || L.cols() != sigma.rows())
        throw ModelError("interval_variance: dimension mismatch");
    IntervalVariance iv;
    iv.V = numerics::noise_gramian(Ac, L * sigma, tau);
    iv.Q = numerics::psd_sqrt(iv.V);
    return iv;
}

ConvergenceReport contraction(const observer::CoordinatedObserver& obs) {
    ConvergenceReport rep;
    const int d = obs.error_dim;
    Matrix M = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < obs.Lambda.size(); ++j) {
        const double nrm = numerics::operator_norm(obs.Lambda[j]);
        rep.lambda_norms.push_back(nrm);
        rep.gamma_exact += obs.probabilities[j] * nrm;
        M += obs.probabilities[j] * obs.Lambda[j].transpose() * obs.Lambda[j];
    }
    rep.rho_M = numerics::spectral_radius(M);
    rep.stable = rep.rho_M < 1.0;

    // Block-diagonal operators: norms are the largest block norms.
    Matrix scaled = obs.F * obs.exp_A_tau * obs.Phi;
    for (std::size_t i = 0; i < obs.decomps.size(); ++i) {
        const int ni = obs.decomps[i].n_i;
        if (ni == 0) continue;
        rep.gamma1 = std::max(rep.gamma1, obs.probabilities[i] * numerics::operator_norm(obs.exp_Ac_tau[i]));
        scaled.middleRows(obs.offsets[i], ni) *= 1.0 - obs.probabilities[i];
    }
    rep.gamma2 = numerics::operator_norm(scaled);
    return rep;
}

double h_function(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& F,
                  const Eigen::Ref<const Matrix>& Phi, double tau) {
    return numerics::operator_norm(F * numerics::matrix_exponential(A, tau) * Phi);
}

TauMax compute_tau_max(const Eigen::Ref<const Matrix>& A, const std::vector<observer::SubsystemDecomposition>& decomps,
                       double scan_window, double scan_step) {
    TauMax out;
    out.scan_window = scan_window;
    Eigen::Index n_s = 0;
    for (const auto& d : decomps) {
        n_s += d.n_i;
        out.q_max = std::max(out.q_max, 1.0 - d.probability);
    }
    if (!(out.q_max < 1.0)) throw ModelError("tau_max: some scenario has zero probability");
    const Eigen::Index n = A.rows();
    Matrix F(n_s, n);
    Eigen::Index at = 0;
    for (const auto& d : decomps) {
        F.middleRows(at, d.n_i) = d.F;
        at += d.n_i;
    }
    if (numerics::numerical_rank(F) < n) throw ModelError("tau_max: stacked F is rank-deficient");
    const Matrix Phi = (F.transpose() * F).ldlt().solve(F.transpose());

    auto holds = [&](double tau) { return out.q_max * h_function(A, F, Phi, tau) < 1.0; };
    double lo = 0.0;
    double hi = -1.0;
    const auto steps = static_cast<long>(std::ceil(scan_window / scan_step));
    for (long k = 1; k <= steps; ++k) {
        const double t = std::min(scan_window, k * scan_step);
        if (!holds(t)) {
            hi = t;
            break;
        }
        lo = t;
    }
    if (hi < 0) {
        out.unbounded = true;
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (holds(mid) ? lo : hi) = mid;
    }
    out.value = lo;
    return out;
}

SteadyState steady_state(const observer::CoordinatedObserver& obs) {
    SteadyState ss;
    const int d = obs.error_dim;
    ss.M = Matrix::Zero(d, d);
    ss.Psi = Matrix::Zero(d, d);
    for (std::size_t j = 0; j < obs.Lambda.size(); ++j) {
        ss.M += obs.probabilities[j] * obs.Lambda[j].transpose() * obs.Lambda[j];
        ss.Psi += obs.probabilities[j] * obs.Q[j].transpose() * obs.Q[j];
    }
    ss.M = 0.5 * (ss.M + ss.M.transpose());
    ss.Psi = 0.5 * (ss.Psi + ss.Psi.transpose());
    if (numerics::spectral_radius(ss.M) >= 1.0)
        throw NumericalError("unstable error dynamics; steady-state variance undefined");
    ss.S = numerics::psd_sqrt(ss.M);
    ss.W_inf = numerics::solve_symmetric_stein(ss.S, ss.Psi);
    ss.residual = (ss.S * ss.W_inf * ss.S - ss.W_inf + ss.Psi).norm();
    ss.mu_inf = ss.W_inf.trace();
    ss.mu_state = (obs.readout * ss.W_inf * obs.readout.transpose()).trace();
    return ss;
}

Design design_observer(const ObserverSpec& spec) {
    std::vector<observer::SubsystemDecomposition> decomps;
    for (const shs::Scenario& s : spec.set.scenarios)
        decomps.push_back(observer::decompose(spec.A, s, spec.completion));
    Design out;
    out.notes = observer::design_gains(decomps, spec.poles);
    out.obs = observer::build(spec.A, spec.set, decomps, spec.tau, spec.mode);
    return out;
}

std::vector<TradeoffRow> tradeoff_sweep(const ObserverSpec& spec, const std::vector<double>& scales) {
    std::vector<TradeoffRow> rows;
    for (double scale : scales) {
        ObserverSpec scaled = spec;
        for (Complex& z : scaled.poles.default_poles) z *= scale;
        for (auto& [_, list] : scaled.poles.per_scenario)
            for (Complex& z : list) z *= scale;
        const Design d = design_observer(scaled);
        TradeoffRow row;
        row.scale = scale;
        const ConvergenceReport rep = contraction(d.obs);
        row.gamma_exact = rep.gamma_exact;
        row.stable = rep.stable;
        row.mu_inf = rep.stable ? steady_state(d.obs).mu_inf : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace gridshs::analysis
