#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "gridshs/errors.hpp"
#include "gridshs/numerics.hpp"

namespace gridshs::numerics {

Matrix matrix_exponential(const Eigen::Ref<const Matrix>& A, double t) {
    if (A.rows() != A.cols()) throw NumericalError("matrix_exponential: matrix is not square");
    if (!std::isfinite(t)) throw NumericalError("matrix_exponential: non-finite time");
    require_finite(A, "matrix_exponential");
    if (A.size() == 0) return Matrix(0, 0);
    Matrix At = A * t;
    Matrix E = At.exp();
    return E;
}

Matrix noise_gramian(const Eigen::Ref<const Matrix>& Ac, const Eigen::Ref<const Matrix>& N, double tau) {
    const Eigen::Index p = Ac.rows();
    if (Ac.cols() != p || N.rows() != p) throw NumericalError("noise_gramian: dimension mismatch");
    if (!(tau > 0.0)) throw NumericalError("noise_gramian: tau must be positive");
    if (p == 0) return Matrix(0, 0);
    require_finite(Ac, "noise_gramian");
    require_finite(N, "noise_gramian");

    // exp([[-Ac, NN^T], [0, Ac^T]] tau) = [[*, E12], [0, E22]] with E22 = e^{Ac^T tau},
    // and V = E22^T E12.
    Matrix Z = Matrix::Zero(2 * p, 2 * p);
    Z.topLeftCorner(p, p) = -Ac;
    Z.topRightCorner(p, p) = N * N.transpose();
    Z.bottomRightCorner(p, p) = Ac.transpose();
    const Matrix E = matrix_exponential(Z, tau);
    Matrix V = E.bottomRightCorner(p, p).transpose() * E.topRightCorner(p, p);
    return 0.5 * (V + V.transpose());
}

}  // namespace gridshs::numerics
