#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "gridshs/errors.hpp"
#include "gridshs/numerics.hpp"

namespace gridshs::numerics {
namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

constexpr int kMaxSweeps = 20000;
constexpr double kSweepRtol = 1e-13;

bool is_real_pole(const Complex& z) { return std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z)); }

// Real poles ascending, then complex pairs (positive imaginary part first, conjugate next).
std::vector<Complex> order_poles(const std::vector<Complex>& desired) {
    std::vector<Complex> real, upper;
    for (const Complex& z : desired) {
        if (is_real_pole(z))
            real.emplace_back(z.real(), 0.0);
        else if (z.imag() > 0)
            upper.push_back(z);
    }
    std::sort(real.begin(), real.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
    std::sort(upper.begin(), upper.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    std::vector<Complex> out = real;
    for (const Complex& z : upper) {
        out.push_back(z);
        out.push_back(std::conj(z));
    }
    return out;
}

void validate_poles(const std::vector<Complex>& desired, Eigen::Index p) {
    if (static_cast<Eigen::Index>(desired.size()) != p)
        throw ModelError("place_poles: expected " + std::to_string(p) + " poles, got " +
                         std::to_string(desired.size()));
    int upper = 0, lower = 0;
    for (const Complex& z : desired) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw NumericalError("place_poles: non-finite pole");
        if (!is_real_pole(z)) (z.imag() > 0 ? upper : lower)++;
    }
    for (const Complex& z : desired) {
        if (is_real_pole(z) || z.imag() < 0) continue;
        const bool has_conj = std::any_of(desired.begin(), desired.end(), [&](const Complex& w) {
            return std::abs(w - std::conj(z)) <= 1e-10 * std::max(1.0, std::abs(z));
        });
        if (!has_conj) throw ModelError("place_poles: pole list is not closed under conjugation");
    }
    if (upper != lower) throw ModelError("place_poles: pole list is not closed under conjugation");
    for (std::size_t i = 0; i < desired.size(); ++i)
        for (std::size_t j = i + 1; j < desired.size(); ++j)
            if (std::abs(desired[i] - desired[j]) <= 1e-9 * std::max(1.0, std::abs(desired[i])))
                throw ModelError("place_poles: repeated pole " + std::to_string(desired[i].real()) +
                                 " requested; the robust placement needs distinct poles");
}

// Characteristic polynomial of the requested spectrum evaluated at A (real arithmetic).
Matrix char_poly_at(const Matrix& A, const std::vector<Complex>& ordered) {
    const Eigen::Index p = A.rows();
    const Matrix I = Matrix::Identity(p, p);
    Matrix P = I;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        const Complex z = ordered[k];
        if (is_real_pole(z)) {
            P = P * (A - z.real() * I);
        } else {
            P = P * (A * A - 2.0 * z.real() * A + std::norm(z) * I);
            ++k;
        }
    }
    return P;
}

// Single-output observer gain: L = phi(A) O^{-1} e_p.
Vector ackermann(const Matrix& A, const Eigen::RowVectorXd& c, const std::vector<Complex>& ordered) {
    const Eigen::Index p = A.rows();
    Matrix O(p, p);
    Eigen::RowVectorXd row = c;
    for (Eigen::Index i = 0; i < p; ++i) {
        O.row(i) = row;
        row = row * A;
    }
    Vector ep = Vector::Zero(p);
    ep(p - 1) = 1.0;
    const Vector x = O.fullPivLu().solve(ep);
    return char_poly_at(A, ordered) * x;
}

Matrix real_block_form(const std::vector<Complex>& ordered) {
    const auto p = static_cast<Eigen::Index>(ordered.size());
    Matrix D = Matrix::Zero(p, p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const Complex z = ordered[k];
        if (is_real_pole(z)) {
            D(k, k) = z.real();
        } else {
            D(k, k) = D(k + 1, k + 1) = z.real();
            D(k, k + 1) = z.imag();
            D(k + 1, k) = -z.imag();
            ++k;
        }
    }
    return D;
}

// State feedback K (m x p) with eig(A - B K) = ordered, B of full column rank m >= 2.
// Kautsky-Nichols-Van Dooren method 0: each eigenvector is rotated, inside its admissible
// subspace, towards the normal of the span of the others until |det X| stops growing.
Matrix knv0_feedback(const Matrix& A, const Matrix& B, const std::vector<Complex>& ordered) {
    const Eigen::Index p = A.rows();
    const Eigen::Index m = B.cols();

    Eigen::HouseholderQR<Matrix> qr(B);
    const Matrix Q = qr.householderQ() * Matrix::Identity(p, p);
    const Matrix R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    const Matrix U0 = Q.leftCols(m);
    const Matrix U1 = Q.rightCols(p - m);

    Matrix closed;
    if (m == p) {
        closed = real_block_form(ordered);
    } else {
        std::vector<CMatrix> S(ordered.size());
        CMatrix X(p, p);
        const CMatrix I = CMatrix::Identity(p, p);
        for (std::size_t j = 0; j < ordered.size(); ++j) {
            const Complex z = ordered[j];
            if (j > 0 && !is_real_pole(z) && z.imag() < 0) {
                S[j] = S[j - 1].conjugate();
                X.col(j) = X.col(j - 1).conjugate();
                continue;
            }
            const CMatrix G = (U1.transpose().cast<Complex>() * (A.cast<Complex>() - z * I)).adjoint();
            Eigen::HouseholderQR<CMatrix> gq(G);
            const CMatrix Qg = gq.householderQ() * CMatrix::Identity(p, p);
            S[j] = Qg.rightCols(m);
            CVector x = S[j].rowwise().sum();
            X.col(j) = x / x.norm();
        }

        double det_prev = std::abs(X.determinant());
        for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
            for (std::size_t j = 0; j < ordered.size(); ++j) {
                const Complex z = ordered[j];
                if (!is_real_pole(z) && z.imag() < 0) continue;
                CMatrix Y(p, p - 1);
                for (Eigen::Index c = 0, k = 0; c < p; ++c)
                    if (c != static_cast<Eigen::Index>(j)) Y.col(k++) = X.col(c);
                Eigen::HouseholderQR<CMatrix> yq(Y);
                const CVector normal = (yq.householderQ() * CMatrix::Identity(p, p)).col(p - 1);
                CVector y = S[j] * (S[j].adjoint() * normal);
                const double ny = y.norm();
                if (ny <= 1e-12) continue;
                X.col(j) = y / ny;
                if (!is_real_pole(z)) X.col(j + 1) = X.col(j).conjugate();
            }
            const double det = std::abs(X.determinant());
            const bool settled = det > std::sqrt(std::numeric_limits<double>::epsilon()) &&
                                 std::abs(det - det_prev) <= kSweepRtol * det;
            det_prev = det;
            if (settled) break;
        }

        CVector lam(p);
        for (Eigen::Index k = 0; k < p; ++k) lam(k) = ordered[k];
        Eigen::PartialPivLU<CMatrix> xlu(X);
        if (std::abs(xlu.determinant()) < 1e-14)
            throw NumericalError("place_poles: eigenvector matrix is singular; try other poles");
        const CMatrix Mc = X * lam.asDiagonal() * xlu.inverse();
        closed = Mc.real();
    }
    return R.triangularView<Eigen::Upper>().solve(U0.transpose() * (A - closed));
}

}  // namespace

Matrix place_poles(const Eigen::Ref<const Matrix>& A22, const Eigen::Ref<const Matrix>& C2,
                   const std::vector<Complex>& desired) {
    const Eigen::Index p = A22.rows();
    const Eigen::Index r = C2.rows();
    if (A22.cols() != p || C2.cols() != p) throw NumericalError("place_poles: dimension mismatch");
    if (p == 0) return Matrix(0, r);
    require_finite(A22, "place_poles");
    require_finite(C2, "place_poles");
    validate_poles(desired, p);
    if (r == 0) throw ModelError("place_poles: (C2, A22) is not observable (no outputs)");

    Matrix O(p * r, p);
    Matrix blk = C2;
    for (Eigen::Index i = 0; i < p; ++i) {
        O.middleRows(i * r, r) = blk;
        blk = blk * A22;
    }
    if (numerical_rank(O) < p) throw ModelError("place_poles: (C2, A22) is not observable");

    const std::vector<Complex> ordered = order_poles(desired);

    // Dual problem on (A22^T, C2^T); redundant outputs are removed through the SVD of C2^T.
    const Matrix A = A22.transpose();
    const Matrix B = C2.transpose();
    Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeFullV);
    const int rb = numerical_rank(B);
    const Matrix Vr = svd.matrixV().leftCols(rb);
    const Matrix Br = B * Vr;

    Matrix L;
    if (rb == 1) {
        const Vector l = ackermann(A22, Br.transpose(), ordered);
        L = l * Vr.transpose();
    } else {
        const Matrix Kr = knv0_feedback(A, Br, ordered);
        L = (Vr * Kr).transpose();
    }

    const Matrix Ac = A22 - L * C2;
    double scale = 1.0;
    for (const Complex& z : desired) scale = std::max(scale, std::abs(z));
    const double miss = multiset_distance(eigenvalues(Ac), desired);
    if (!(miss <= 1e-6 * scale))
        throw NumericalError("place_poles: placed spectrum misses the request by " + std::to_string(miss));
    return L;
}

}  // namespace gridshs::numerics
