#include <string>

#include "gridshs/errors.hpp"
#include "gridshs/observer.hpp"

namespace gridshs::observer {

Estimator::Estimator(const CoordinatedObserver& obs, int n_sub) : obs_(obs), n_sub_(n_sub) {
    if (n_sub < 1) throw ConfigError("n_sub must be at least 1");
    h_ = obs.tau / n_sub;
    for (const SubsystemDecomposition& d : obs.decomps) {
        if (d.n_i == 0) {
            drift_.emplace_back(0, 0);
        } else if (obs.mode == Recombination::stacked) {
            drift_.push_back(numerics::matrix_exponential(d.A22, h_));
        } else {
            const Eigen::Index nu = d.A11.rows();
            Matrix B = Matrix::Zero(obs.n, obs.n);
            B.topLeftCorner(nu, nu) = d.A11;
            B.topRightCorner(nu, d.n_i) = d.A12;
            B.bottomRightCorner(d.n_i, d.n_i) = d.A22;
            drift_.push_back(numerics::matrix_exponential(B, h_));
        }
    }
}

Vector Estimator::step(const Vector& xhat, int alpha, const Eigen::Ref<const Matrix>& dy) const {
    if (alpha < 0 || alpha >= static_cast<int>(obs_.decomps.size()))
        throw ModelError("unknown scenario position " + std::to_string(alpha));
    if (xhat.size() != obs_.n) throw ModelError("estimate has the wrong dimension");
    const SubsystemDecomposition& d = obs_.decomps[alpha];
    const Eigen::Index r = d.C.rows();
    if (dy.rows() != n_sub_ || dy.cols() != r)
        throw ModelError("measurement substream length mismatch for scenario " + std::to_string(d.scenario));

    if (d.n_i == 0 || !d.has_gain) {
        if (obs_.mode == Recombination::active) return obs_.exp_A_tau * xhat;
        return obs_.Phi * (obs_.F * (obs_.exp_A_tau * xhat));
    }

    const Matrix& E = drift_[alpha];
    if (obs_.mode == Recombination::stacked) {
        Vector phi = d.F * xhat;
        for (int s = 0; s < n_sub_; ++s) {
            const Vector innov = dy.row(s).transpose() - d.C2 * phi * h_;
            phi = E * phi + d.L * innov;
        }
        Vector stack = obs_.F * (obs_.exp_A_tau * xhat);
        stack.segment(obs_.offsets[alpha], d.n_i) = phi;
        return obs_.Phi * stack;
    }

    Vector z = d.Tinv * xhat;
    for (int s = 0; s < n_sub_; ++s) {
        const Vector innov = dy.row(s).transpose() - d.C2 * z.tail(d.n_i) * h_;
        z = E * z;
        z.tail(d.n_i) += d.L * innov;
    }
    return d.T * z;
}

}  // namespace gridshs::observer
