#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/QR>

#include "gridshs/errors.hpp"
#include "gridshs/observer.hpp"

namespace gridshs::observer {

Completion parse_completion(const std::string& s) {
    if (s == "orthonormal") return Completion::orthonormal;
    if (s == "paper_identity") return Completion::paper_identity;
    throw ConfigError("unknown completion '" + s + "' (expected orthonormal or paper_identity)");
}

Recombination parse_recombination(const std::string& s) {
    if (s == "stacked") return Recombination::stacked;
    if (s == "active") return Recombination::active;
    throw ConfigError("unknown recombination '" + s + "' (expected stacked or active)");
}

std::string to_string(Completion c) { return c == Completion::orthonormal ? "orthonormal" : "paper_identity"; }
std::string to_string(Recombination r) { return r == Recombination::stacked ? "stacked" : "active"; }

Matrix observability_matrix(const Eigen::Ref<const Matrix>& C, const Eigen::Ref<const Matrix>& A) {
    const Eigen::Index n = A.rows();
    const Eigen::Index r = C.rows();
    if (A.cols() != n || (r > 0 && C.cols() != n)) throw ModelError("observability_matrix: dimension mismatch");
    Matrix W(n * r, n);
    if (r == 0) return W;
    Matrix blk = C;
    for (Eigen::Index i = 0; i < n; ++i) {
        W.middleRows(i * r, r) = blk;
        blk = blk * A;
    }
    return W;
}

ObservabilityReport check_combined_observability(const shs::ScenarioSet& set, const Eigen::Ref<const Matrix>& A,
                                                 const numerics::Tolerance& tol) {
    ObservabilityReport rep;
    rep.n = static_cast<int>(A.rows());
    Eigen::Index rows = 0;
    std::vector<Matrix> blocks;
    for (const shs::Scenario& s : set.scenarios) {
        blocks.push_back(observability_matrix(s.C, A));
        rep.scenario_ranks.push_back(numerics::numerical_rank(blocks.back(), tol));
        rows += blocks.back().rows();
    }
    Matrix Ws(rows, A.cols());
    Eigen::Index at = 0;
    for (const Matrix& b : blocks) {
        Ws.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    rep.rank = numerics::numerical_rank(Ws, tol);
    return rep;
}

namespace {

// Identity columns left after removing one pivot row per kernel column (largest magnitude,
// first on ties), with elimination so that pivots are distinct.
Matrix identity_completion(const Matrix& M) {
    const Eigen::Index n = M.rows();
    Matrix work = M;
    std::vector<bool> pivot(n, false);
    for (Eigen::Index j = 0; j < work.cols(); ++j) {
        Eigen::Index best = -1;
        double best_abs = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (pivot[i]) continue;
            const double a = std::abs(work(i, j));
            if (best < 0 || a > best_abs * (1.0 + 1e-9)) {
                best = i;
                best_abs = a;
            }
        }
        pivot[best] = true;
        for (Eigen::Index k = j + 1; k < work.cols(); ++k)
            work.col(k) -= (work(best, k) / work(best, j)) * work.col(j);
    }
    Matrix N(n, n - M.cols());
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!pivot[i]) N.col(c++) = Vector::Unit(n, i);
    return N;
}

}  // namespace

SubsystemDecomposition decompose(const Eigen::Ref<const Matrix>& A, const shs::Scenario& scenario,
                                 Completion completion, const numerics::Tolerance& tol) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw ModelError("decompose: A is not square");
    const Eigen::Index r = scenario.C.rows();
    if (r > 0 && scenario.C.cols() != n) throw ModelError("decompose: C has the wrong number of columns");

    SubsystemDecomposition d;
    d.scenario = scenario.index;
    d.C = r > 0 ? Matrix(scenario.C) : Matrix(0, n);
    d.sigma = scenario.sigma;
    d.probability = scenario.probability;
    d.W = observability_matrix(d.C, A);
    d.n_i = numerics::numerical_rank(d.W, tol);
    const Eigen::Index ni = d.n_i;
    const Eigen::Index nu = n - ni;

    if (ni == n || ni == 0) {
        d.M = ni == n ? Matrix(n, 0) : Matrix::Identity(n, n);
        d.N = ni == n ? Matrix::Identity(n, n) : Matrix(n, 0);
        d.T = Matrix::Identity(n, n);
        d.Tinv = Matrix::Identity(n, n);
    } else {
        d.M = numerics::kernel_base(d.W, tol);
        if (completion == Completion::orthonormal) {
            Eigen::HouseholderQR<Matrix> qr(d.M);
            const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
            d.N = Q.rightCols(ni);
        } else {
            d.N = identity_completion(d.M);
        }
        d.T.resize(n, n);
        d.T << d.M, d.N;
        Eigen::FullPivLU<Matrix> lu(d.T);
        if (!lu.isInvertible()) throw NumericalError("decompose: completion does not give an invertible T");
        d.Tinv = lu.inverse();
        if ((d.Tinv * d.T - Matrix::Identity(n, n)).norm() > 1e-10)
            throw NumericalError("decompose: T is too ill-conditioned to invert accurately");
    }
    d.G = d.Tinv.topRows(nu);
    d.F = d.Tinv.bottomRows(ni);

    const Matrix At = d.Tinv * A * d.T;
    const double a_norm = std::max(numerics::operator_norm(A), 1e-300);
    if (nu > 0 && ni > 0 && numerics::operator_norm(At.bottomLeftCorner(ni, nu)) > 1e-8 * a_norm)
        throw NumericalError("decompose: transformed A lacks the structural zero block");
    d.A11 = At.topLeftCorner(nu, nu);
    d.A12 = At.topRightCorner(nu, ni);
    d.A22 = At.bottomRightCorner(ni, ni);
    const Matrix CT = d.C * d.T;
    if (r > 0 && nu > 0 && numerics::operator_norm(CT.leftCols(nu)) > 1e-8 * numerics::operator_norm(d.C))
        throw NumericalError("decompose: C T does not vanish on the unobservable block");
    d.C2 = CT.rightCols(ni);
    return d;
}

std::vector<std::string> design_gains(std::vector<SubsystemDecomposition>& decomps, const PoleSpec& poles) {
    std::vector<std::string> notes;
    for (SubsystemDecomposition& d : decomps) {
        d.has_gain = false;
        d.L = Matrix(d.n_i, d.C.rows());
        d.Ac = d.A22;
        if (d.n_i == 0 || d.C.rows() == 0) continue;

        const auto it = poles.per_scenario.find(d.scenario);
        const std::vector<Complex>& list = it != poles.per_scenario.end() ? it->second : poles.default_poles;
        const auto ni = static_cast<std::size_t>(d.n_i);
        if (list.size() < ni)
            throw ModelError("scenario " + std::to_string(d.scenario) + " needs " + std::to_string(ni) +
                             " poles, got " + std::to_string(list.size()));
        d.poles.assign(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(ni));
        d.poles_truncated = list.size() > ni;
        if (d.poles_truncated)
            notes.push_back("scenario " + std::to_string(d.scenario) + ": observable dimension " + std::to_string(ni) +
                            ", using the first " + std::to_string(ni) + " of " + std::to_string(list.size()) +
                            " requested poles");
        d.L = numerics::place_poles(d.A22, d.C2, d.poles);
        d.Ac = d.A22 - d.L * d.C2;
        d.has_gain = true;
        for (const Complex& z : d.poles)
            if (z.real() >= 0)
                notes.push_back("scenario " + std::to_string(d.scenario) + ": requested pole with non-negative real part");
    }
    return notes;
}

}  // namespace gridshs::observer
