#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace gridshs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

namespace numerics {

struct Tolerance {
    double rank_tol = 1e-9;      // relative to the largest singular value
    double residual_tol = 1e-8;  // absolute
};

// Throws NumericalError when any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& M, const char* what);

Matrix matrix_exponential(const Eigen::Ref<const Matrix>& A, double t);

// V = int_0^tau e^{Ac s} N N^T e^{Ac^T s} ds, by Van Loan's block exponential.
Matrix noise_gramian(const Eigen::Ref<const Matrix>& Ac, const Eigen::Ref<const Matrix>& N, double tau);

// Observer gain L (p x r) with eig(A22 - L C2) = desired.
Matrix place_poles(const Eigen::Ref<const Matrix>& A22, const Eigen::Ref<const Matrix>& C2,
                   const std::vector<Complex>& desired);

int numerical_rank(const Eigen::Ref<const Matrix>& M, const Tolerance& tol = {});

// Orthonormal basis of ker(M); b x 0 when M has full column rank.
Matrix kernel_base(const Eigen::Ref<const Matrix>& M, const Tolerance& tol = {});

Matrix psd_sqrt(const Eigen::Ref<const Matrix>& M, const Tolerance& tol = {});

// Solves S W S - W + Psi = 0 for symmetric S with spectral radius < 1.
Matrix solve_symmetric_stein(const Eigen::Ref<const Matrix>& S, const Eigen::Ref<const Matrix>& Psi,
                             const Tolerance& tol = {});

double operator_norm(const Eigen::Ref<const Matrix>& M);
double spectral_radius(const Eigen::Ref<const Matrix>& M);

// Sorted eigenvalues (by real part, then imaginary part).
std::vector<Complex> eigenvalues(const Eigen::Ref<const Matrix>& M);

// Largest distance between paired entries after greedy nearest matching; +inf on size mismatch.
double multiset_distance(std::vector<Complex> a, std::vector<Complex> b);

}  // namespace numerics
}  // namespace gridshs
