#include <cmath>
#include <functional>
#include <string>

#include "gridshs/errors.hpp"
#include "gridshs/grid.hpp"
#include "gridshs/parallel.hpp"

namespace gridshs::grid {
namespace {

using Perturbed = std::function<Vector(double)>;  // f at coordinate offset +/- h

struct Column {
    Vector value;
    double step = 0.0;
    double gap = 0.0;
};

// Central difference at h and h/2; accepted when they agree to rtol, then Richardson-extrapolated.
Column fd_column(const Perturbed& f, double h0, double rtol) {
    double worst_gap = 0.0;
    for (double h : {h0, h0 / 4.0, h0 * 4.0, h0 / 16.0}) {
        const Vector c1 = (f(h) - f(-h)) / (2.0 * h);
        const Vector c2 = (f(h / 2) - f(-h / 2)) / h;
        const double scale = c2.norm();
        const double diff = (c1 - c2).norm();
        const double gap = scale > 1e-9 ? diff / scale : diff;
        if (gap <= rtol) return {c2 + (c2 - c1) / 3.0, h, gap};
        worst_gap = std::max(worst_gap, gap);
    }
    throw NumericalError("linearize: finite-difference column failed the Richardson check (gap " +
                         std::to_string(worst_gap) + ")");
}

}  // namespace

LinearizedSystem linearize(const GridModel& grid, const Equilibrium& eq, const LinearizeOptions& opt) {
    const GridModel& base = eq.balanced;
    base.validate();
    const std::vector<int> dyn = base.dynamic_indices();
    const std::vector<int> nond = base.non_dynamic_indices();
    const auto nd = static_cast<Eigen::Index>(dyn.size());
    const auto nn = static_cast<Eigen::Index>(nond.size());
    const Eigen::Index n = 2 * nd;
    if (eq.state.size() != n) throw ModelError("linearize: equilibrium does not match the grid");
    (void)grid;

    LinearizedSystem sys;
    sys.equilibrium = eq;
    for (int i : dyn) sys.dynamic_bus_ids.push_back(base.buses[i].id);
    for (int i : nond) sys.non_dynamic_bus_ids.push_back(base.buses[i].id);

    const Vector f0 = dynamics(base, eq.state, &eq.network);
    const double res = f0.size() ? f0.cwiseAbs().maxCoeff() : 0.0;
    if (res > 1e-6)
        throw ModelError("linearize: state is not an equilibrium (|f| = " + std::to_string(res) + ")");

    // Column jobs: angles (A), P_in dynamic (B1), P_in non-dynamic (B2), P_L dynamic (D1), P_L non-dynamic (D2).
    enum class Kind { angle, input_d, input_nd, load_d, load_nd };
    struct Job {
        Kind kind;
        Eigen::Index k;
    };
    std::vector<Job> jobs;
    for (Eigen::Index k = 0; k < nd; ++k) jobs.push_back({Kind::angle, k});
    for (Eigen::Index k = 0; k < nd; ++k) jobs.push_back({Kind::input_d, k});
    for (Eigen::Index k = 0; k < nn; ++k) jobs.push_back({Kind::input_nd, k});
    for (Eigen::Index k = 0; k < nd; ++k) jobs.push_back({Kind::load_d, k});
    for (Eigen::Index k = 0; k < nn; ++k) jobs.push_back({Kind::load_nd, k});

    std::vector<Column> cols(jobs.size());
    parallel_for(jobs.size(), opt.workers, [&](std::size_t j) {
        const Job job = jobs[j];
        Perturbed f;
        if (job.kind == Kind::angle) {
            f = [&, job](double h) {
                Vector x = eq.state;
                x(2 * job.k) += h;
                return dynamics(base, x, &eq.network);
            };
        } else {
            f = [&, job](double h) {
                GridModel g = base;
                const bool dynamic_side = job.kind == Kind::input_d || job.kind == Kind::load_d;
                Bus& b = g.buses[dynamic_side ? dyn[job.k] : nond[job.k]];
                if (job.kind == Kind::input_d || job.kind == Kind::input_nd)
                    b.P_in += h;
                else
                    b.P_L += h;
                return dynamics(g, eq.state, &eq.network);
            };
        }
        cols[j] = fd_column(f, opt.step, opt.richardson_rtol);
    });

    sys.A = Matrix::Zero(n, n);
    sys.B1 = Matrix::Zero(n, nd);
    sys.B2 = Matrix::Zero(n, nn);
    sys.D1 = Matrix::Zero(n, nd);
    sys.D2 = Matrix::Zero(n, nn);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const Job job = jobs[j];
        switch (job.kind) {
            case Kind::angle: sys.A.col(2 * job.k) = cols[j].value; break;
            case Kind::input_d: sys.B1.col(job.k) = cols[j].value; break;
            case Kind::input_nd: sys.B2.col(job.k) = cols[j].value; break;
            case Kind::load_d: sys.D1.col(job.k) = cols[j].value; break;
            case Kind::load_nd: sys.D2.col(job.k) = cols[j].value; break;
        }
        sys.step = std::max(sys.step, cols[j].step);
        sys.richardson_gap = std::max(sys.richardson_gap, cols[j].gap);
    }

    // Kinematic rows and the damping column are linear in the state: fill them exactly.
    for (Eigen::Index k = 0; k < nd; ++k) {
        const Bus& b = base.buses[dyn[k]];
        sys.A.row(2 * k).setZero();
        sys.B1.row(2 * k).setZero();
        sys.B2.row(2 * k).setZero();
        sys.D1.row(2 * k).setZero();
        sys.D2.row(2 * k).setZero();
        sys.A(2 * k, 2 * k + 1) = 1.0;
        sys.A.col(2 * k + 1).setZero();
        sys.A(2 * k, 2 * k + 1) = 1.0;
        sys.A(2 * k + 1, 2 * k + 1) = -b.b / b.M;
    }
    numerics::require_finite(sys.A, "linearize");
    return sys;
}

}  // namespace gridshs::grid
