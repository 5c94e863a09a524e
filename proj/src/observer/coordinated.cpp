#include <string>

#include <Eigen/Cholesky>

#include "gridshs/errors.hpp"
#include "gridshs/observer.hpp"

namespace gridshs::observer {
namespace {

// [[A11, A12], [0, Ac]] in the scenario's transformed coordinates.
Matrix block_system(const SubsystemDecomposition& d) {
    const Eigen::Index nu = d.A11.rows();
    const Eigen::Index ni = d.n_i;
    Matrix B = Matrix::Zero(nu + ni, nu + ni);
    B.topLeftCorner(nu, nu) = d.A11;
    B.topRightCorner(nu, ni) = d.A12;
    B.bottomRightCorner(ni, ni) = d.Ac;
    return B;
}

}  // namespace

CoordinatedObserver build(const Eigen::Ref<const Matrix>& A, const shs::ScenarioSet& set,
                          const std::vector<SubsystemDecomposition>& decomps, double tau, Recombination mode,
                          const numerics::Tolerance& tol) {
    if (!(tau > 0.0)) throw ConfigError("sampling interval tau must be positive");
    if (decomps.size() != set.size()) throw ModelError("build: one decomposition per scenario is required");
    numerics::require_finite(A, "A");

    CoordinatedObserver obs;
    obs.tau = tau;
    obs.mode = mode;
    obs.n = static_cast<int>(A.rows());
    obs.A = A;
    obs.decomps = decomps;
    for (const SubsystemDecomposition& d : decomps) {
        if (d.n_i > 0 && d.C.rows() > 0 && !d.has_gain)
            throw ModelError("build: scenario " + std::to_string(d.scenario) + " has no observer gain");
        obs.offsets.push_back(obs.n_s);
        obs.n_s += d.n_i;
        obs.probabilities.push_back(d.probability);
    }

    const int n = obs.n;
    obs.F.resize(obs.n_s, n);
    for (std::size_t i = 0; i < decomps.size(); ++i)
        if (decomps[i].n_i > 0) obs.F.middleRows(obs.offsets[i], decomps[i].n_i) = decomps[i].F;
    if (obs.n_s == 0 || numerics::numerical_rank(obs.F, tol) < n)
        throw ModelError("stacked F is rank-deficient: the combined observability condition fails");
    const Matrix FtF = obs.F.transpose() * obs.F;
    obs.Phi = FtF.ldlt().solve(obs.F.transpose());
    if ((obs.Phi * obs.F - Matrix::Identity(n, n)).norm() > 1e-8)
        throw NumericalError("stacked F is too ill-conditioned for a reliable left inverse");

    obs.exp_A_tau = numerics::matrix_exponential(A, tau);
    for (const SubsystemDecomposition& d : decomps)
        obs.exp_Ac_tau.push_back(d.n_i > 0 ? numerics::matrix_exponential(d.Ac, tau) : Matrix(0, 0));

    if (mode == Recombination::stacked) {
        obs.error_dim = obs.n_s;
        obs.readout = obs.Phi;
        const Matrix open = obs.F * obs.exp_A_tau * obs.Phi;
        for (std::size_t j = 0; j < decomps.size(); ++j) {
            const SubsystemDecomposition& d = decomps[j];
            Matrix Lam = open;
            Matrix Q = Matrix::Zero(obs.n_s, obs.n_s);
            if (d.n_i > 0) {
                const Eigen::Index off = obs.offsets[j];
                Lam.middleRows(off, d.n_i).setZero();
                Lam.block(off, off, d.n_i, d.n_i) = obs.exp_Ac_tau[j];
                if (d.has_gain)
                    Q.block(off, off, d.n_i, d.n_i) =
                        numerics::psd_sqrt(numerics::noise_gramian(d.Ac, d.L * d.sigma, tau), tol);
            }
            obs.Lambda.push_back(std::move(Lam));
            obs.Q.push_back(std::move(Q));
        }
    } else {
        obs.error_dim = n;
        obs.readout = Matrix::Identity(n, n);
        for (const SubsystemDecomposition& d : decomps) {
            if (d.n_i == 0) {
                obs.Lambda.push_back(obs.exp_A_tau);
                obs.Q.push_back(Matrix::Zero(n, n));
                continue;
            }
            const Matrix B = block_system(d);
            obs.Lambda.push_back(d.T * numerics::matrix_exponential(B, tau) * d.Tinv);
            Matrix Q = Matrix::Zero(n, n);
            if (d.has_gain) {
                Matrix N = Matrix::Zero(n, d.C.rows());
                N.bottomRows(d.n_i) = d.L * d.sigma;
                Matrix V = d.T * numerics::noise_gramian(B, N, tau) * d.T.transpose();
                V = 0.5 * (V + V.transpose());
                Q = numerics::psd_sqrt(V, tol);
            }
            obs.Q.push_back(std::move(Q));
        }
    }
    return obs;
}

}  // namespace gridshs::observer
