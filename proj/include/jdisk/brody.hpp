#pragma once

// Reparametrization of a disk so its Poincare-weighted derivative peaks at
// the origin with a prescribed value, the rescaling g_n(z) = f_n(z / r_n),
// and extraction of a limiting J-complex line on a fixed window.

#include "jdisk/diskgrid.hpp"
#include "jdisk/error.hpp"
#include "jdisk/solver.hpp"
#include "jdisk/structure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace jdisk {

/// s(t) = sup over the interior of |f_t'(z)| (r^2 - |z|^2)/r^2 for f_t(z) = f(tz).
/// Uses the chain rule |f_t'(z)| = t |f_x(tz)|, with f_x interpolated (cubic).
inline WeightedSup scaling_sup(const DiskMap& f, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::InvalidParams, "t must lie in [0, 1]");
    const DiskGrid& g = *f.grid;
    if (t == 0.0) return {0.0, g.origin()};
    const Mat dx = partials(f).dx;
    if (t == 1.0) return detail::weighted_sup(g, [&](std::size_t k) { return dx.col(k).norm(); });
    return detail::weighted_sup(g, [&](std::size_t k) { return t * interp_cubic_columns(g, dx, t * g.node(k)).norm(); });
}

struct ReparamOptions {
    int scan_samples = 64;
    double bisect_tol = 1e-6;
    double hypothesis_slack = 1e-9;
};

struct ReparamResult {
    DiskMap f_tilde;
    double t0 = 1.0;
    std::optional<Complex> z0;   ///< recentering point; empty when none was needed
    double s_at_0 = 0.0;         ///< |f_tilde'(0)|
    double s_sup = 0.0;          ///< weighted derivative supremum of f_tilde
    double tol = 0.0;            ///< tol_brody for this grid
    double shrink = 1.0;         ///< working radius / source radius
};

/// max(1e-3, 0.05 h): the normalization tolerance on a grid of spacing h.
inline double brody_tolerance(const DiskGrid& g) { return std::max(1e-3, 0.05 * g.spacing()); }

/// Finds the smallest t0 with s(t0) = c and returns f_{t0}, recentered by the
/// Mobius swap of 0 and the maximizing point, so that the weighted derivative
/// supremum is |f_tilde'(0)| = c.
inline ReparamResult brody_reparametrize(const DiskMap& f, double c, const ReparamOptions& opt = {}) {
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidParams, "c must be positive");
    const DiskGrid& g = *f.grid;
    const double d0 = dx_at(f, g.origin()).norm();
    if (d0 < c - opt.hypothesis_slack) {
        std::ostringstream os;
        os << "|f'(0)| = " << d0 << " is below c = " << c;
        throw Error(ErrorKind::HypothesisViolated, os.str());
    }

    // Coarse scan for the first sample with s >= c, then bisection; s(0) = 0.
    double lo = 0.0, hi = 1.0;
    for (int i = 1; i <= opt.scan_samples; ++i) {
        const double t = static_cast<double>(i) / opt.scan_samples;
        if (scaling_sup(f, t).value >= c) {
            hi = t;
            break;
        }
        lo = t;
    }
    while (hi - lo > opt.bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        (scaling_sup(f, mid).value >= c ? hi : lo) = mid;
    }
    const double t0 = hi;
    const WeightedSup peak = scaling_sup(f, t0);

    ReparamResult res;
    res.t0 = t0;
    const double r = g.radius();
    if (peak.node == g.origin() && t0 == 1.0) {
        res.f_tilde = f;
    } else {
        std::function<Complex(Complex)> map_of;
        if (peak.node == g.origin()) {
            map_of = [t0](Complex z) { return t0 * z; };
        } else {
            res.z0 = g.node(peak.node);
            const MobiusAutomorphism L = mobius_swap(*res.z0, r);
            map_of = [t0, L](Complex z) { return t0 * L(z); };
        }
        GridPtr target = make_grid(r, g.axis_count());
        bool fits = true;
        for (std::size_t k = 0; k < target->node_count() && fits; ++k) fits = interpolable(g, map_of(target->node(k)));
        if (!fits) {
            // Compose on a slightly smaller disk to stay clear of the boundary cells.
            const double rw = r - 2.0 * g.spacing();
            target = make_grid(rw, g.axis_count());
            res.shrink = rw / r;
            for (std::size_t k = 0; k < target->node_count(); ++k)
                if (!interpolable(g, map_of(target->node(k))))
                    throw Error(ErrorKind::OutsideInterpolationRange,
                                "recentred map needs data within one cell of the boundary");
        }
        res.f_tilde = resample(f, target, map_of, Interpolation::Cubic);
    }
    res.s_at_0 = dx_at(res.f_tilde, res.f_tilde.grid->origin()).norm();
    res.s_sup = sup_poincare_derivative(res.f_tilde).value;
    res.tol = brody_tolerance(*res.f_tilde.grid);
    return res;
}

/// g(z) = f(z / r_n) on the disk of radius r * r_n, r_n = |f'(0)|; the node
/// values are reused, only the grid is dilated.
inline DiskMap rescale_step(const DiskMap& f) {
    const double rn = dx_at(f, f.grid->origin()).norm();
    if (!(rn > 1e-12)) throw Error(ErrorKind::ZeroDerivative, "|f'(0)| vanishes");
    return {make_grid(f.grid->radius() * rn, f.grid->axis_count()), f.convention, f.values};
}

/// Diagnostic ratio ||f||_{C^2} on the inner disk of radius r/2 over
/// ||f||_sup on the whole grid (derivatives by finite differences).
inline double c2_ratio(const DiskMap& f) {
    const DiskGrid& g = *f.grid;
    double sup = 0.0;
    for (Eigen::Index k = 0; k < f.values.cols(); ++k) sup = std::max(sup, f.values.col(k).norm());
    if (sup == 0.0) return 0.0;
    const Partials p1 = partials(f);
    const Partials px = partials({f.grid, f.convention, p1.dx});
    const Partials py = partials({f.grid, f.convention, p1.dy});
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        if (std::abs(g.node(k)) > 0.5 * g.radius()) continue;
        const auto j = static_cast<Eigen::Index>(k);
        c0 = std::max(c0, f.values.col(j).norm());
        c1 = std::max({c1, p1.dx.col(j).norm(), p1.dy.col(j).norm()});
        c2 = std::max({c2, px.dx.col(j).norm(), px.dy.col(j).norm(), py.dy.col(j).norm()});
    }
    return (c0 + c1 + c2) / sup;
}

struct RescalingStep {
    int n = 0;
    double r_n = 0.0;
    double g_derivative = 0.0;              ///< |g_n'(0)|, 1 up to rounding
    double sup_derivative = 0.0;            ///< weighted derivative supremum of g_n
    double t0 = 1.0;
    bool recentered = false;
    std::optional<Complex> z0;              ///< recentering point when recentered
    double shrink = 1.0;
    std::optional<double> delta;            ///< sup distance to the previous window
    double c2_ratio = 0.0;                  ///< diagnostic, see c2_ratio()
    bool skipped = false;
    std::string note;
};

struct LineCandidate {
    DiskMap samples;                        ///< on the window disk of radius R
    double derivative_at_0 = 0.0;
    double cr_residual = 0.0;
    bool converged = false;
    double achieved_delta = 0.0;
};

struct RescalingReport {
    std::vector<RescalingStep> steps;
    std::optional<LineCandidate> line;
    bool converged = false;
    std::optional<int> converged_at;        ///< index into steps
    std::string message;
};

struct ExtractOptions {
    double R = 2.0;
    double tol = 1e-10;
    int n_start = 1;
    int n_max = 8;
    int window_n = 65;
    int agreeing = 3;    ///< consecutive deltas that must fall below tol
};

/// Runs rescale -> reparametrize (c = 1) -> restrict to the window of radius R
/// over the family n = n_start .. n_max and tracks window-to-window deltas.
/// Members whose rescaled disk does not cover the window are skipped.
inline RescalingReport extract_line(const StructureField& J, const std::function<DiskMap(int)>& family,
                                    const ExtractOptions& opt) {
    if (!(opt.R > 0.0) || !(opt.tol > 0.0) || opt.n_max < opt.n_start || opt.agreeing < 1)
        throw Error(ErrorKind::InvalidParams, "bad extract_line options");
    RescalingReport rep;
    const GridPtr window = make_grid(opt.R, opt.window_n);
    std::optional<DiskMap> prev;
    int run = 0;
    for (int n = opt.n_start; n <= opt.n_max; ++n) {
        RescalingStep step;
        step.n = n;
        const DiskMap f = family(n);
        step.r_n = dx_at(f, f.grid->origin()).norm();
        const DiskMap g = rescale_step(f);
        step.g_derivative = dx_at(g, g.grid->origin()).norm();
        step.sup_derivative = sup_poincare_derivative(g).value;
        const ReparamResult rp = brody_reparametrize(g, 1.0);
        step.t0 = rp.t0;
        step.recentered = rp.z0.has_value();
        step.z0 = rp.z0;
        step.shrink = rp.shrink;
        bool covered = true;
        for (std::size_t k = 0; k < window->node_count() && covered; ++k)
            covered = interpolable(*rp.f_tilde.grid, window->node(k));
        if (!covered) {
            step.skipped = true;
            step.note = "window not covered by the rescaled disk";
            rep.steps.push_back(step);
            continue;
        }
        DiskMap w = resample(rp.f_tilde, window, [](Complex z) { return z; }, Interpolation::Cubic);
        step.c2_ratio = c2_ratio(w);
        if (prev) {
            step.delta = sup_distance(w, *prev);
            run = *step.delta < opt.tol ? run + 1 : 0;
        }
        prev = w;
        rep.steps.push_back(step);
        LineCandidate line;
        line.samples = std::move(w);
        line.derivative_at_0 = dx_at(line.samples, window->origin()).norm();
        line.cr_residual = cr_residual(J, line.samples);
        line.achieved_delta = step.delta.value_or(0.0);
        if (run >= opt.agreeing) {
            line.converged = true;
            rep.converged = true;
            rep.converged_at = static_cast<int>(rep.steps.size()) - 1;
            rep.line = std::move(line);
            return rep;
        }
        rep.line = std::move(line);
    }
    rep.message = "no " + std::to_string(opt.agreeing) + " consecutive deltas below tol by n = " +
                  std::to_string(opt.n_max);
    return rep;
}

/// Family n -> p + n z nu on the unit disk (dilations).
inline std::function<DiskMap(int)> dilation_family(const Vec& p, const Vec& nu, int grid_n) {
    const GridPtr grid = make_grid(1.0, grid_n);
    return [=](int n) { return linear_target(p, static_cast<double>(n) * nu, grid); };
}

/// Family n -> derivative_disk(J, p, lambda_n nu) with lambda_n = lambda0 + (n - 1) step.
/// With density > 0 the grid has N - 1 >= density * lambda_n intervals, so the
/// rescaled disks share one spacing (2 / density); otherwise cfg.grid_n is used.
inline std::function<DiskMap(int)> derivative_ladder(const StructureField& J, const Vec& p, const Vec& nu,
                                                     double lambda0, double step, const SolverConfig& cfg,
                                                     double density = 0.0) {
    return [=](int n) {
        const double lambda = lambda0 + (n - 1) * step;
        SolverConfig c = cfg;
        if (density > 0.0) c.grid_n = 2 * static_cast<int>(std::ceil(0.5 * density * lambda)) + 1;
        return derivative_disk(J, p, lambda * nu, c).v;
    };
}

} // namespace jdisk
