#pragma once

// Chains of J-holomorphic disks: costs, upper bounds on the Kobayashi
// pseudo-distance, push-forward by holomorphic maps, and the derivative
// supremum indicator.

#include "jdisk/diskgrid.hpp"
#include "jdisk/error.hpp"
#include "jdisk/solver.hpp"
#include "jdisk/structure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace jdisk {

struct ChainLink {
    DiskSolution disk;
    Complex a{0.0, 0.0};
    Complex b{0.0, 0.0};
    double cost = 0.0;   ///< poincare_distance(a, b, 1)
    Vec start;           ///< declared f(a)
    Vec end;             ///< declared f(b)
};

struct Chain {
    std::vector<ChainLink> links;
    std::vector<Vec> waypoints;   ///< p_0 = p, ..., p_k = q
    DomainDescriptor domain;
    double tol = 1e-8;            ///< endpoint tolerance

    double total_cost() const {
        double s = 0.0;
        for (const auto& l : links) s += l.cost;
        return s;
    }
};

namespace detail {

inline bool same_point(const DomainDescriptor& dom, const Vec& a, const Vec& b, double tol) {
    return a.size() == b.size() && dom.displacement(a, b).norm() <= tol;
}

} // namespace detail

/// Sum of the link costs after checking that every link hits its declared
/// endpoints and that consecutive links and waypoints connect.
inline double chain_cost(const Chain& c) {
    auto broken = [](const std::string& what) { throw Error(ErrorKind::InvalidChain, what); };
    if (c.links.empty()) {
        if (c.waypoints.size() > 1 && !detail::same_point(c.domain, c.waypoints.front(), c.waypoints.back(), c.tol))
            broken("empty chain between distinct points");
        return 0.0;
    }
    if (c.waypoints.size() != c.links.size() + 1) broken("expected one more waypoint than links");
    double total = 0.0;
    for (std::size_t i = 0; i < c.links.size(); ++i) {
        const ChainLink& l = c.links[i];
        const std::string tag = "link " + std::to_string(i) + ": ";
        if (!detail::same_point(c.domain, eval_interp(l.disk.v, l.a), l.start, c.tol)) broken(tag + "f(a) misses start");
        if (!detail::same_point(c.domain, eval_interp(l.disk.v, l.b), l.end, c.tol)) broken(tag + "f(b) misses end");
        if (!detail::same_point(c.domain, l.start, c.waypoints[i], c.tol)) broken(tag + "start is not the waypoint");
        if (!detail::same_point(c.domain, l.end, c.waypoints[i + 1], c.tol)) broken(tag + "end is not the waypoint");
        total += poincare_distance(l.a, l.b, 1.0);
    }
    return total;
}

/// The same disks traversed backwards (a and b swapped); cost is unchanged.
inline Chain reverse_chain(const Chain& c) {
    Chain out = c;
    std::reverse(out.links.begin(), out.links.end());
    std::reverse(out.waypoints.begin(), out.waypoints.end());
    for (auto& l : out.links) {
        std::swap(l.a, l.b);
        std::swap(l.start, l.end);
    }
    return out;
}

/// c1 followed by c2; throws InvalidChain unless c1 ends where c2 starts.
inline Chain concatenate(const Chain& c1, const Chain& c2) {
    if (c1.waypoints.empty() || c2.waypoints.empty() ||
        !detail::same_point(c1.domain, c1.waypoints.back(), c2.waypoints.front(), std::max(c1.tol, c2.tol)))
        throw Error(ErrorKind::InvalidChain, "chains do not meet");
    Chain out = c1;
    out.tol = std::max(c1.tol, c2.tol);
    out.links.insert(out.links.end(), c2.links.begin(), c2.links.end());
    out.waypoints.insert(out.waypoints.end(), c2.waypoints.begin() + 1, c2.waypoints.end());
    return out;
}

struct SearchEntry {
    int k = 0;
    int link = 0;
    double t = 0.0;
    bool success = false;
    double cost = 0.0;
    std::string error;
};

struct DistanceEstimate {
    double upper = 0.0;
    Chain best_chain;
    std::optional<int> best_k;
    std::vector<SearchEntry> search_log;
};

struct DistanceOptions {
    int k_max = 1;
    std::vector<double> t_grid{0.5};
    SolverConfig cfg;
    double residual_tol = 1e-3;   ///< cr_residual accepted for a link
};

/// Uniform t grid tmax, tmax - step, ..., down to tmin (inclusive).
inline std::vector<double> t_grid_between(double tmin, double tmax, int count) {
    if (!(tmin > 0.0 && tmax < 1.0 && tmin <= tmax) || count < 1)
        throw Error(ErrorKind::InvalidParams, "t grid needs 0 < tmin <= tmax < 1 and count >= 1");
    std::vector<double> out;
    if (count == 1 || tmin == tmax) return {tmin};
    for (int i = 0; i < count; ++i) out.push_back(tmin + (tmax - tmin) * i / (count - 1));
    return out;
}

/// Upper bound on the pseudo-distance from chains over equally spaced
/// waypoints on the chart segment (torus: shortest representative), k = 1..k_max.
/// Each link is a two-point disk with a = 0, b = t and the smallest t in the
/// grid that solves and certifies; the cheapest chain wins, ties by k.
inline DistanceEstimate estimate_distance(const StructureField& J, const DomainDescriptor& domain, const Vec& p,
                                          const Vec& q, const DistanceOptions& opt) {
    const int d = J.convention.dim();
    if (p.size() != d || q.size() != d) throw Error(ErrorKind::InvalidParams, "point dimension mismatch");
    if (!domain.contains(p) || !domain.contains(q)) throw Error(ErrorKind::OutsideDisk, "p and q must lie in the domain");
    if (opt.k_max < 1 || opt.t_grid.empty()) throw Error(ErrorKind::InvalidParams, "need k_max >= 1 and a non-empty t grid");
    std::vector<double> ts = opt.t_grid;
    for (double t : ts)
        if (!(t > 0.0 && t < 1.0)) throw Error(ErrorKind::InvalidParams, "t grid values must lie in (0, 1)");
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    opt.cfg.validate();

    DistanceEstimate est;
    est.best_chain.domain = domain;
    est.best_chain.tol = opt.cfg.tol_newton;
    const Vec disp = domain.displacement(p, q);
    if (disp.norm() == 0.0) {
        est.best_chain.waypoints = {p};
        est.best_k = 0;
        return est;
    }

    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= opt.k_max; ++k) {
        Chain chain;
        chain.domain = domain;
        chain.tol = opt.cfg.tol_newton;
        for (int i = 0; i <= k; ++i) chain.waypoints.push_back(p + (static_cast<double>(i) / k) * disp);
        bool ok = true;
        for (int i = 0; i < k && ok; ++i) {
            bool linked = false;
            for (double t : ts) {
                SearchEntry e{k, i, t, false, std::atanh(t), {}};
                try {
                    DiskSolution s = two_point_disk(J, chain.waypoints[i], chain.waypoints[i + 1], t, opt.cfg);
                    if (!(s.residual <= opt.residual_tol)) throw Error(ErrorKind::NotConverged, "residual above tolerance");
                    ChainLink link{std::move(s), {0.0, 0.0}, {t, 0.0}, poincare_distance({0.0, 0.0}, {t, 0.0}, 1.0),
                                   chain.waypoints[i], chain.waypoints[i + 1]};
                    e.cost = link.cost;
                    e.success = true;
                    chain.links.push_back(std::move(link));
                    linked = true;
                } catch (const Error& err) {
                    if (err.kind() == ErrorKind::InvalidParams) throw;
                    e.error = err.what();
                }
                est.search_log.push_back(e);
                if (linked) break;
            }
            ok = linked;
        }
        if (!ok) continue;
        const double cost = chain_cost(chain);
        if (cost < best) {
            best = cost;
            est.best_chain = std::move(chain);
            est.best_k = k;
        }
    }
    if (!est.best_k) throw Error(ErrorKind::NoChainFound, "no (k, t) combination produced a certified chain");
    est.upper = best;
    return est;
}

/// A map between domains, asserted (J, J')-holomorphic by the caller.
struct HolomorphicMap {
    std::function<Vec(const Vec&)> apply;
    std::string name = "map";
};

inline HolomorphicMap translation_map(const Vec& c) {
    return {[c](const Vec& x) { return Vec(x + c); }, "translation"};
}

/// x -> A x with A complex-linear (commutes with the standard structure).
inline HolomorphicMap linear_map(const Mat& A) {
    return {[A](const Vec& x) { return Vec(A * x); }, "linear"};
}

/// Composes every link disk with f; link parameters and costs are unchanged.
/// Throws NotHolomorphicMap when a composed link fails the residual check.
inline Chain pushforward_chain(const Chain& c, const HolomorphicMap& f, const StructureField& J_target,
                               const DomainDescriptor& target_domain, double residual_tol = 1e-3) {
    Chain out;
    out.domain = target_domain;
    out.tol = c.tol;
    for (const Vec& w : c.waypoints) out.waypoints.push_back(f.apply(w));
    for (std::size_t i = 0; i < c.links.size(); ++i) {
        const ChainLink& l = c.links[i];
        ChainLink m = l;
        for (Eigen::Index k = 0; k < m.disk.v.values.cols(); ++k)
            m.disk.v.values.col(k) = f.apply(l.disk.v.values.col(k));
        m.disk.u = m.disk.v;
        if (m.disk.epsilon_used > 0.0) m.disk.u.values /= m.disk.epsilon_used;
        m.disk.residual = cr_residual(J_target, m.disk.v);
        if (!(m.disk.residual <= residual_tol)) {
            std::ostringstream os;
            os << "link " << i << " composed with " << f.name << " has residual " << m.disk.residual;
            throw Error(ErrorKind::NotHolomorphicMap, os.str());
        }
        m.start = f.apply(l.start);
        m.end = f.apply(l.end);
        out.links.push_back(std::move(m));
    }
    return out;
}

struct BoundProbe {
    double lambda = 0.0;
    bool feasible = false;
    std::string reason;
};

struct BoundReport {
    double lower = 0.0;                ///< largest feasible lambda found
    bool unbounded_suspected = false;  ///< lambda_max itself was feasible
    double bisect_tol = 0.0;
    std::vector<BoundProbe> probes;
};

/// Bisection on lambda in [0, lambda_max] for "derivative_disk(J, p, lambda nu)
/// solves and its image stays in the domain". lambda_max is probed first.
inline BoundReport derivative_bound(const StructureField& J, const DomainDescriptor& domain, const Vec& p,
                                    const Vec& nu, double lambda_max, const SolverConfig& cfg,
                                    double bisect_tol = 1e-3) {
    const int d = J.convention.dim();
    if (p.size() != d || nu.size() != d) throw Error(ErrorKind::InvalidParams, "point/direction dimension mismatch");
    if (std::abs(nu.norm() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidParams, "nu must have unit norm");
    if (!(lambda_max > 0.0) || !(bisect_tol > 0.0)) throw Error(ErrorKind::InvalidParams, "lambda_max and tolerance must be positive");
    if (!domain.contains(p)) throw Error(ErrorKind::OutsideDisk, "p must lie in the domain");
    cfg.validate();

    BoundReport rep;
    rep.bisect_tol = bisect_tol;
    auto feasible = [&](double lambda) {
        BoundProbe probe{lambda, false, {}};
        try {
            const DiskSolution s = derivative_disk(J, p, lambda * nu, cfg);
            probe.feasible = true;
            for (Eigen::Index k = 0; k < s.v.values.cols() && probe.feasible; ++k)
                if (!domain.contains(s.v.values.col(k))) {
                    probe.feasible = false;
                    probe.reason = "image leaves the domain";
                }
        } catch (const Error& err) {
            if (err.kind() == ErrorKind::InvalidParams) throw;
            probe.reason = err.what();
        }
        rep.probes.push_back(probe);
        return probe.feasible;
    };

    rep.probes.push_back({0.0, true, "constant disk"});
    if (feasible(lambda_max)) {
        rep.lower = lambda_max;
        rep.unbounded_suspected = true;
        return rep;
    }
    double lo = 0.0, hi = lambda_max;
    while (hi - lo > bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    rep.lower = lo;
    return rep;
}

} // namespace jdisk
