#pragma once

// J-holomorphic disks through the fixed-point form
//   u = h + P( q_J(eps u) d u/dz ),
// whose solutions give J-holomorphic v = eps u, plus the outer quasi-Newton
// loops that prescribe two points or a point and a derivative.

#include "jdisk/cauchygreen.hpp"
#include "jdisk/diskgrid.hpp"
#include "jdisk/error.hpp"
#include "jdisk/structure.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace jdisk {

struct SolverConfig {
    double epsilon = 0.1;
    double tol_fixpoint = 1e-10;
    int max_iter = 200;
    double tol_newton = 1e-8;
    int max_newton = 30;
    double fd_step = 1e-6;
    int grid_n = 65;               ///< nodes per axis of the unit-disk grid
    int continuation = 4;          ///< epsilon halvings allowed on failure
    int divergence_window = 5;
    double cond_cap = kDefaultConditionCap;

    /// Throws InvalidParams unless every field is in range. `allow_zero_epsilon`
    /// admits eps = 0 (the trivial fixed point) for picard_solve.
    void validate(bool allow_zero_epsilon = false) const {
        auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidParams, what); };
        if (!std::isfinite(epsilon) || epsilon > 1.0 || epsilon < 0.0 || (!allow_zero_epsilon && epsilon == 0.0))
            bad("epsilon must lie in (0, 1]");
        if (!(tol_fixpoint > 0.0) || !(tol_newton > 0.0) || !(fd_step > 0.0) || !(cond_cap > 1.0))
            bad("tolerances, fd_step and cond_cap must be positive");
        if (max_iter < 1 || max_newton < 1 || divergence_window < 1 || continuation < 0)
            bad("iteration limits must be positive");
        if (grid_n < 3 || grid_n % 2 == 0) bad("grid_n must be odd and >= 3");
    }
};

struct DiskSolution {
    DiskMap u;                        ///< unscaled iterate
    DiskMap v;                        ///< the disk, v = epsilon_used * u
    double residual = 0.0;            ///< cr_residual(J, v)
    int iterations = 0;               ///< Picard iterations of the final solve
    double epsilon_used = 0.0;
    std::vector<double> step_history; ///< sup |u^{k+1} - u^k| per Picard step
    int newton_steps = 0;             ///< outer iterations (0 for a bare Picard solve)
    std::vector<double> mismatch_history;

    /// Ratios of consecutive Picard steps.
    std::vector<double> contraction_ratios() const {
        std::vector<double> out;
        for (std::size_t k = 1; k < step_history.size(); ++k)
            if (step_history[k - 1] > 0.0) out.push_back(step_history[k] / step_history[k - 1]);
        return out;
    }
};

/// Shared Cauchy-Green operators, one per grid layout. Building one is the
/// expensive part of a solve, and many solves share a grid.
namespace detail {

struct CGCache {
    std::mutex mutex;
    std::map<std::pair<double, int>, std::shared_ptr<const CGOperator>> ops;
};

inline CGCache& cg_cache() {
    static CGCache cache;
    return cache;
}

} // namespace detail

inline std::shared_ptr<const CGOperator> cg_shared(const GridPtr& grid) {
    auto& cache = detail::cg_cache();
    const std::lock_guard lock(cache.mutex);
    auto& slot = cache.ops[{grid->radius(), grid->axis_count()}];
    if (!slot) slot = std::make_shared<const CGOperator>(grid);
    return slot;
}

/// Drops every cached operator (they are rebuilt on demand).
inline void cg_cache_clear() {
    auto& cache = detail::cg_cache();
    const std::lock_guard lock(cache.mutex);
    cache.ops.clear();
}

namespace detail {

inline std::string node_text(const DiskGrid& g, std::size_t k) {
    std::ostringstream os;
    os << "node " << k << " at z = (" << g.node(k).real() << ", " << g.node(k).imag() << ")";
    return os.str();
}

inline Mat q_at(const StructureField& J, const Vec& v, const DiskGrid& g, std::size_t k, double cap) {
    try {
        return q_matrix(J, v, cap);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Singular) throw;
        throw Error(ErrorKind::Singular, "Jst + J(v) not invertible at " + node_text(g, k));
    }
}

inline double sup_norm(const Mat& values) {
    double best = 0.0;
    for (Eigen::Index k = 0; k < values.cols(); ++k) best = std::max(best, values.col(k).norm());
    return best;
}

} // namespace detail

/// sup over the interior mask of || d/dzbar v - q_J(v) d/dz v ||.
inline double cr_residual(const StructureField& J, const DiskMap& v, double cond_cap = kDefaultConditionCap) {
    if (v.dim() != J.convention.dim()) throw Error(ErrorKind::InvalidParams, "map and structure dimensions differ");
    const DiskGrid& g = *v.grid;
    const Partials p = partials(v);
    double best = 0.0;
    for (std::size_t k : g.interior_nodes()) {
        const Vec dz = detail::wirtinger(p.dx.col(k), p.dy.col(k), -1.0);
        const Vec dzb = detail::wirtinger(p.dx.col(k), p.dy.col(k), 1.0);
        const Mat q = detail::q_at(J, v.at(k), g, k, cond_cap);
        best = std::max(best, (dzb - q * dz).norm());
    }
    return best;
}

/// Iterates u^{k+1} = h + P(q_J(eps u^k) d u^k/dz) from u^0 = h.
inline DiskSolution picard_solve(const StructureField& J, const SolverConfig& cfg, const DiskMap& h) {
    cfg.validate(true);
    if (h.dim() != J.convention.dim()) throw Error(ErrorKind::InvalidParams, "target and structure dimensions differ");
    if (!h.values.allFinite()) throw Error(ErrorKind::InvalidParams, "target has non-finite values");
    const double eps = cfg.epsilon;
    DiskSolution sol{h, h, 0.0, 0, eps, {}, 0, {}};

    if (eps == 0.0) {
        // Phi(0, .) is the identity: h is already the fixed point.
        sol.iterations = 1;
        sol.step_history.push_back(0.0);
        sol.v.values.setZero();
        sol.residual = cr_residual(J, sol.v, cfg.cond_cap);
        return sol;
    }

    const GridPtr& grid = h.grid;
    const auto op = cg_shared(grid);
    const std::size_t m = grid->node_count();
    DiskMap u = h;
    std::vector<double> norms{detail::sup_norm(u.values)};
    Mat phi(h.dim(), static_cast<Eigen::Index>(m));
    Mat pu;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        for (std::size_t k = 0; k < m; ++k) {
            const Mat q = detail::q_at(J, eps * u.at(k), *grid, k, cfg.cond_cap);
            const Vec du = detail::wirtinger(detail::axis_derivative2(u, k, 1, 0), detail::axis_derivative2(u, k, 0, 1), -1.0);
            phi.col(k) = q * du;
        }
        op->apply(phi, pu);
        Mat next = h.values + pu;
        if (!next.allFinite()) throw Error(ErrorKind::Diverged, "non-finite Picard iterate");
        const double step = detail::sup_norm(next - u.values);
        u.values = std::move(next);
        sol.step_history.push_back(step);
        norms.push_back(detail::sup_norm(u.values));
        const std::size_t w = static_cast<std::size_t>(cfg.divergence_window);
        if (norms.size() > w) {
            const double before = norms[norms.size() - 1 - w];
            if (before > 0.0 && norms.back() > 2.0 * before)
                throw Error(ErrorKind::Diverged, "Picard iterate norm doubled within " + std::to_string(w) + " steps");
        }
        if (step < cfg.tol_fixpoint) {
            sol.iterations = it;
            sol.u = u;
            sol.v = u;
            sol.v.values *= eps;
            sol.residual = cr_residual(J, sol.v, cfg.cond_cap);
            return sol;
        }
    }
    throw Error(ErrorKind::Diverged, "no Picard convergence in " + std::to_string(cfg.max_iter) + " iterations");
}

/// h(z) = p + (z/t)(q - p) sampled on the grid: h(0) = p, h(t) = q.
inline DiskMap affine_target(const Vec& p, const Vec& q, double t, const GridPtr& grid) {
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorKind::InvalidParams, "interpolation node t must lie in (0, 1)");
    if (p.size() != q.size() || p.size() % 2 != 0) throw Error(ErrorKind::InvalidParams, "p and q must share an even dimension");
    const ComplexConvention conv{static_cast<int>(p.size() / 2)};
    const Vec d = q - p;
    return DiskMap::sample(grid, conv, [&](Complex z) { return Vec(p + complex_scale(z / t, d)); });
}

/// h(z) = p + z w.
inline DiskMap linear_target(const Vec& p, const Vec& w, const GridPtr& grid) {
    if (p.size() != w.size() || p.size() % 2 != 0) throw Error(ErrorKind::InvalidParams, "p and w must share an even dimension");
    const ComplexConvention conv{static_cast<int>(p.size() / 2)};
    return DiskMap::sample(grid, conv, [&](Complex z) { return Vec(p + complex_scale(z, w)); });
}

namespace detail {

struct OuterProblem {
    /// Target for the observed quantities, in v-space.
    Vec target;
    /// Builds the affine seed in u-space from the unknown x.
    std::function<DiskMap(const Vec&)> seed;
    /// Observed quantities of a solved disk, in v-space.
    std::function<Vec(const DiskSolution&)> observe;
    int blocks = 2;   ///< mismatch is measured per block of size dim
};

inline double block_mismatch(const Vec& r, int blocks) {
    const Eigen::Index d = r.size() / blocks;
    double worst = 0.0;
    for (int b = 0; b < blocks; ++b) worst = std::max(worst, r.segment(b * d, d).norm());
    return worst;
}

/// Broyden iteration on x -> observe(picard(seed(x))) = target with identity
/// seed Jacobian (the eps -> 0 limit of the map), refreshed by finite
/// differences if a step fails to reduce the mismatch.
inline DiskSolution quasi_newton(const StructureField& J, const SolverConfig& cfg, const OuterProblem& prob) {
    const double eps = cfg.epsilon;
    Vec x = prob.target / eps;
    auto evaluate = [&](const Vec& xx, DiskSolution& out) -> Vec {
        out = picard_solve(J, cfg, prob.seed(xx));
        return prob.observe(out) - prob.target;
    };
    DiskSolution sol;
    Vec r = evaluate(x, sol);
    const Eigen::Index n = x.size();
    Mat B = eps * Mat::Identity(n, n);   // d(observed v)/dx at eps -> 0
    std::vector<double> history{block_mismatch(r, prob.blocks)};
    bool refreshed = false;
    for (int step = 1; step <= cfg.max_newton; ++step) {
        if (history.back() <= cfg.tol_newton) {
            sol.newton_steps = step;
            sol.mismatch_history = history;
            return sol;
        }
        const Vec dx = -B.partialPivLu().solve(r);
        DiskSolution trial;
        const Vec rn = evaluate(x + dx, trial);
        const double mis = block_mismatch(rn, prob.blocks);
        if (mis >= history.back() && !refreshed) {
            // Rebuild the Jacobian from finite differences and retry this step.
            for (Eigen::Index j = 0; j < n; ++j) {
                Vec xp = x;
                xp[j] += cfg.fd_step;
                DiskSolution probe;
                B.col(j) = (evaluate(xp, probe) - r) / cfg.fd_step;
            }
            refreshed = true;
            continue;
        }
        B += ((rn - r) - B * dx) * dx.transpose() / dx.squaredNorm();
        x += dx;
        r = rn;
        sol = std::move(trial);
        history.push_back(mis);
        refreshed = false;
    }
    if (history.back() <= cfg.tol_newton) {
        sol.newton_steps = cfg.max_newton;
        sol.mismatch_history = history;
        return sol;
    }
    std::ostringstream os;
    os << "endpoint mismatch " << history.back() << " after " << cfg.max_newton << " quasi-Newton steps";
    throw Error(ErrorKind::NewtonFailed, os.str());
}

/// Runs `attempt` with eps, eps/2, ... (up to cfg.continuation halvings) while
/// it fails with Diverged or NewtonFailed.
template <typename Attempt>
DiskSolution with_continuation(const SolverConfig& cfg, Attempt&& attempt) {
    SolverConfig c = cfg;
    for (int k = 0;; ++k) {
        try {
            return attempt(c);
        } catch (const Error& e) {
            const bool retry = e.kind() == ErrorKind::Diverged || e.kind() == ErrorKind::NewtonFailed;
            if (!retry || k >= cfg.continuation) throw;
            c.epsilon *= 0.5;
        }
    }
}

inline DiskSolution constant_disk(const StructureField& J, const Vec& p, const GridPtr& grid, double eps,
                                  double cond_cap) {
    const ComplexConvention conv = J.convention;
    DiskSolution sol;
    sol.v = DiskMap::sample(grid, conv, [&](Complex) { return p; });
    sol.u = sol.v;
    if (eps > 0.0) sol.u.values /= eps;
    sol.epsilon_used = eps;
    sol.iterations = 0;
    sol.residual = cr_residual(J, sol.v, cond_cap);
    return sol;
}

} // namespace detail

/// A J-holomorphic disk v with v(0) = p0 and v(t) = q0.
inline DiskSolution two_point_disk(const StructureField& J, const Vec& p0, const Vec& q0, double t,
                                   const SolverConfig& cfg) {
    cfg.validate();
    const int d = J.convention.dim();
    if (p0.size() != d || q0.size() != d) throw Error(ErrorKind::InvalidParams, "endpoint dimension mismatch");
    if (!(t > 0.0 && t < 1.0)) throw Error(ErrorKind::InvalidParams, "interpolation node t must lie in (0, 1)");
    const GridPtr grid = make_grid(1.0, cfg.grid_n);
    if (!interpolable(*grid, Complex{t, 0.0}))
        throw Error(ErrorKind::OutsideInterpolationRange, "t is too close to the boundary for this grid");
    if (p0 == q0) return detail::constant_disk(J, p0, grid, cfg.epsilon, cfg.cond_cap);

    return detail::with_continuation(cfg, [&](const SolverConfig& c) {
        detail::OuterProblem prob;
        prob.target.resize(2 * d);
        prob.target << p0, q0;
        prob.seed = [&](const Vec& x) { return affine_target(x.head(d), x.tail(d), t, grid); };
        prob.observe = [&](const DiskSolution& s) {
            Vec out(2 * d);
            out << s.v.at(grid->origin()), eval_interp(s.v, Complex{t, 0.0});
            return out;
        };
        return detail::quasi_newton(J, c, prob);
    });
}

/// A J-holomorphic disk v with v(0) = p and dv/dz(0) = w.
inline DiskSolution derivative_disk(const StructureField& J, const Vec& p, const Vec& w, const SolverConfig& cfg) {
    cfg.validate();
    const int d = J.convention.dim();
    if (p.size() != d || w.size() != d) throw Error(ErrorKind::InvalidParams, "point/tangent dimension mismatch");
    const GridPtr grid = make_grid(1.0, cfg.grid_n);
    if (w.isZero(0.0)) return detail::constant_disk(J, p, grid, cfg.epsilon, cfg.cond_cap);

    return detail::with_continuation(cfg, [&](const SolverConfig& c) {
        detail::OuterProblem prob;
        prob.target.resize(2 * d);
        prob.target << p, w;
        prob.seed = [&](const Vec& x) { return linear_target(x.head(d), x.tail(d), grid); };
        prob.observe = [&](const DiskSolution& s) {
            Vec out(2 * d);
            out << s.v.at(grid->origin()), d_dz_at(s.v, grid->origin());
            return out;
        };
        return detail::quasi_newton(J, c, prob);
    });
}

} // namespace jdisk
