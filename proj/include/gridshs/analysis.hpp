#pragma once

#include <string>
#include <vector>

#include "gridshs/observer.hpp"

namespace gridshs::analysis {

struct IntervalVariance {
    Matrix V;  // filter-error covariance accumulated over one interval
    Matrix Q;  // V^{1/2}
};

IntervalVariance interval_variance(const Eigen::Ref<const Matrix>& Ac, const Eigen::Ref<const Matrix>& L,
                                   const Eigen::Ref<const Matrix>& sigma, double tau);

struct ConvergenceReport {
    double gamma_exact = 0.0;  // sum_j p_j ||Lambda(j)||
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double rho_M = 0.0;        // spectral radius of E[Lambda^T Lambda]
    bool stable = false;
    std::vector<double> lambda_norms;
};

ConvergenceReport contraction(const observer::CoordinatedObserver& obs);

// ||F e^{A tau} Phi|| for the stacked F of the decompositions.
double h_function(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& F,
                  const Eigen::Ref<const Matrix>& Phi, double tau);

struct TauMax {
    double value = 0.0;     // seconds; meaningless when unbounded
    bool unbounded = false; // condition holds over the whole scan window
    double q_max = 0.0;
    double scan_window = 100.0;
};

TauMax compute_tau_max(const Eigen::Ref<const Matrix>& A, const std::vector<observer::SubsystemDecomposition>& decomps,
                       double scan_window = 100.0, double scan_step = 1e-3);

struct SteadyState {
    Matrix M, S, Psi, W_inf;
    double mu_inf = 0.0;
    double mu_state = 0.0;
    double residual = 0.0;
};

// Throws NumericalError when the spectral radius of M is not below 1.
SteadyState steady_state(const observer::CoordinatedObserver& obs);

struct ObserverSpec {
    Matrix A;
    shs::ScenarioSet set;
    observer::PoleSpec poles;
    double tau = 0.0;
    observer::Completion completion = observer::Completion::orthonormal;
    observer::Recombination mode = observer::Recombination::stacked;
};

struct Design {
    observer::CoordinatedObserver obs;
    std::vector<std::string> notes;
};

Design design_observer(const ObserverSpec& spec);

struct TradeoffRow {
    double scale = 1.0;
    double gamma_exact = 0.0;
    bool stable = false;
    double mu_inf = 0.0;  // NaN when unstable
};

std::vector<TradeoffRow> tradeoff_sweep(const ObserverSpec& spec, const std::vector<double>& scales);

}  // namespace gridshs::analysis
