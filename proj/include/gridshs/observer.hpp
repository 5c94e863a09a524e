#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridshs/numerics.hpp"
#include "gridshs/shs.hpp"

namespace gridshs::observer {

enum class Completion { orthonormal, paper_identity };
enum class Recombination { stacked, active };

Completion parse_completion(const std::string& s);
Recombination parse_recombination(const std::string& s);
std::string to_string(Completion c);
std::string to_string(Recombination r);

struct SubsystemDecomposition {
    int scenario = 0;  // scenario label
    Matrix C, sigma;
    double probability = 0.0;
    Matrix W;          // observability matrix
    int n_i = 0;       // observable dimension
    Matrix M, N;       // kernel base, completion
    Matrix T, Tinv;    // T = [M, N]
    Matrix G, F;       // Tinv = [G; F]
    Matrix A11, A12, A22, C2;
    Matrix L, Ac;      // set by design_gains
    bool has_gain = false;
    std::vector<Complex> poles;
    bool poles_truncated = false;  // first n_i of a length-n list were used

    int unobservable_dim() const { return static_cast<int>(T.rows()) - n_i; }
};

Matrix observability_matrix(const Eigen::Ref<const Matrix>& C, const Eigen::Ref<const Matrix>& A);

struct ObservabilityReport {
    int n = 0;
    int rank = 0;
    std::vector<int> scenario_ranks;  // per set position
    bool full() const { return rank == n; }
};

ObservabilityReport check_combined_observability(const shs::ScenarioSet& set, const Eigen::Ref<const Matrix>& A,
                                                 const numerics::Tolerance& tol = {});

SubsystemDecomposition decompose(const Eigen::Ref<const Matrix>& A, const shs::Scenario& scenario,
                                 Completion completion = Completion::orthonormal,
                                 const numerics::Tolerance& tol = {});

struct PoleSpec {
    std::vector<Complex> default_poles;
    std::map<int, std::vector<Complex>> per_scenario;  // keyed by scenario label
};

// Sets L and Ac on every scenario with n_i > 0. Returns human-readable notes (e.g. truncated pole lists).
std::vector<std::string> design_gains(std::vector<SubsystemDecomposition>& decomps, const PoleSpec& poles);

struct CoordinatedObserver {
    double tau = 0.0;
    Recombination mode = Recombination::stacked;
    int n = 0;
    int n_s = 0;                     // sum of n_i
    std::vector<int> offsets;        // start row of block i in the stacked coordinates
    Matrix F, Phi;                   // stacked F (n_s x n) and its left inverse
    Matrix exp_A_tau;
    std::vector<Matrix> exp_Ac_tau;  // per scenario (empty when n_i = 0)

    // One-interval error maps and noise factors in error coordinates (n_s for stacked, n for active).
    int error_dim = 0;
    std::vector<Matrix> Lambda;
    std::vector<Matrix> Q;
    Matrix readout;                  // maps error coordinates to state error (Phi or I)

    std::vector<double> probabilities;
    std::vector<SubsystemDecomposition> decomps;
    Matrix A;
};

CoordinatedObserver build(const Eigen::Ref<const Matrix>& A, const shs::ScenarioSet& set,
                          const std::vector<SubsystemDecomposition>& decomps, double tau,
                          Recombination mode = Recombination::stacked, const numerics::Tolerance& tol = {});

// Runs the active scenario's subsystem filter across one sampling interval.
class Estimator {
  public:
    Estimator(const CoordinatedObserver& obs, int n_sub);

    int n_sub() const { return n_sub_; }
    double substep() const { return h_; }

    // dy: n_sub x r_alpha measurement increments; alpha: position in the scenario set.
    Vector step(const Vector& xhat, int alpha, const Eigen::Ref<const Matrix>& dy) const;

  private:
    const CoordinatedObserver& obs_;
    int n_sub_;
    double h_;
    std::vector<Matrix> drift_;  // per scenario: e^{A22 h} (stacked) or e^{A_block h} (active)
};

}  // namespace gridshs::observer
