#include "gridshs/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gridshs/errors.hpp"

namespace gridshs::numerics {

void require_finite(const Eigen::Ref<const Matrix>& M, const char* what) {
    if (!M.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

int numerical_rank(const Eigen::Ref<const Matrix>& M, const Tolerance& tol) {
    if (M.size() == 0) return 0;
    require_finite(M, "numerical_rank");
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double cutoff = tol.rank_tol * s(0);
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff) ++r;
    return r;
}

Matrix kernel_base(const Eigen::Ref<const Matrix>& M, const Tolerance& tol) {
    const Eigen::Index b = M.cols();
    if (b == 0) return Matrix(0, 0);
    if (M.rows() == 0) return Matrix::Identity(b, b);
    require_finite(M, "kernel_base");

    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    int rank = 0;
    if (s.size() > 0 && s(0) > 0.0) {
        const double cutoff = tol.rank_tol * s(0);
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > cutoff) ++rank;
    }
    Matrix K = svd.matrixV().rightCols(b - rank);

    // Orientation: first significant entry negative, independent of the SVD backend.
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
        const double scale = K.col(j).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < b; ++i) {
            if (std::abs(K(i, j)) > 1e-8 * scale) {
                if (K(i, j) > 0) K.col(j) *= -1.0;
                break;
            }
        }
    }
    return K;
}

Matrix psd_sqrt(const Eigen::Ref<const Matrix>& M, const Tolerance& tol) {
    if (M.rows() != M.cols()) throw NumericalError("psd_sqrt: matrix is not square");
    if (M.size() == 0) return Matrix(0, 0);
    require_finite(M, "psd_sqrt");
    const double norm = operator_norm(M);
    if ((M - M.transpose()).norm() > tol.residual_tol * (1.0 + norm))
        throw NumericalError("psd_sqrt: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
    Vector d = eig.eigenvalues();
    const double floor = -tol.rank_tol * std::max(1.0, d.cwiseAbs().maxCoeff());
    if (d.minCoeff() < floor)
        throw NumericalError("psd_sqrt: matrix is significantly indefinite (min eigenvalue " +
                             std::to_string(d.minCoeff()) + ")");
    d = d.cwiseMax(0.0).cwiseSqrt();
    const Matrix& U = eig.eigenvectors();
    Matrix S = U * d.asDiagonal() * U.transpose();
    return 0.5 * (S + S.transpose());
}

Matrix solve_symmetric_stein(const Eigen::Ref<const Matrix>& S, const Eigen::Ref<const Matrix>& Psi,
                             const Tolerance& tol) {
    const Eigen::Index n = S.rows();
    if (S.cols() != n || Psi.rows() != n || Psi.cols() != n)
        throw NumericalError("solve_symmetric_stein: dimension mismatch");
    if (n == 0) return Matrix(0, 0);
    require_finite(S, "solve_symmetric_stein");
    require_finite(Psi, "solve_symmetric_stein");

    if (spectral_radius(S) >= 1.0)
        throw NumericalError("unstable error dynamics; steady-state variance undefined");

    Matrix W;
    if (n <= 60) {
        // (I - S^T (x) S) vec(W) = vec(Psi).
        const Eigen::Index nn = n * n;
        Matrix K = Matrix::Identity(nn, nn);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                K.block(i * n, j * n, n, n) -= S(j, i) * S;
        Vector rhs = Eigen::Map<const Vector>(Matrix(Psi).data(), nn);
        Vector w = K.partialPivLu().solve(rhs);
        W = Eigen::Map<Matrix>(w.data(), n, n);
    } else {
        // W = sum_k S^k Psi S^k, doubling: W <- W + P W P, P <- P^2.
        W = Psi;
        Matrix P = S;
        for (int it = 0; it < 64; ++it) {
            Matrix inc = P * W * P;
            W += inc;
            P = P * P;
            if (inc.norm() <= 1e-16 * W.norm() || P.norm() < 1e-300) break;
        }
    }
    W = 0.5 * (W + W.transpose());

    const double residual = (S * W * S - W + Psi).norm();
    if (residual > tol.residual_tol * (1.0 + operator_norm(Psi)))
        throw NumericalError("solve_symmetric_stein: residual " + std::to_string(residual) +
                             " exceeds tolerance");
    return W;
}

double operator_norm(const Eigen::Ref<const Matrix>& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

double spectral_radius(const Eigen::Ref<const Matrix>& M) {
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<Complex> eigenvalues(const Eigen::Ref<const Matrix>& M) {
    std::vector<Complex> out;
    if (M.size() == 0) return out;
    Eigen::EigenSolver<Matrix> es(M, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    std::vector<bool> used(b.size(), false);
    for (const Complex& x : a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(x - b[j]);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        used[best_j] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace gridshs::numerics
