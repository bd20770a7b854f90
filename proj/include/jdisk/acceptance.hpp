#pragma once

// The acceptance suite: criteria 1-9 evaluated in-process, each returning
// pass/fail plus the measured quantities. Criterion 10 (determinism of the
// serialized report) is checked by the callers, which run the suite twice.

#include "jdisk/brody.hpp"
#include "jdisk/cauchygreen.hpp"
#include "jdisk/diskgrid.hpp"
#include "jdisk/io.hpp"
#include "jdisk/kobayashi.hpp"
#include "jdisk/solver.hpp"
#include "jdisk/structure.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace jdisk::acceptance {

using io::Json;

struct Criterion {
    int id = 0;
    std::string name;
    bool pass = false;
    Json measured = Json::object();
};

struct Options {
    std::uint64_t seed = 20240521;
};

namespace detail {

inline Vec random_in_ball(std::mt19937_64& rng, int dim, double radius) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec v(dim);
    do {
        for (int i = 0; i < dim; ++i) v[i] = u(rng);
    } while (v.norm() >= 1.0);
    return radius * v;
}

inline DiskMap complex_field(const GridPtr& g, const std::function<Complex(Complex)>& f) {
    return DiskMap::sample(g, ComplexConvention{1}, [&](Complex z) {
        const Complex w = f(z);
        Vec v(2);
        v << w.real(), w.imag();
        return v;
    });
}

/// log2 ratios of consecutive values (halving h each time).
inline std::vector<double> orders(const std::vector<double>& e) {
    std::vector<double> out;
    for (std::size_t i = 1; i < e.size(); ++i) out.push_back(std::log2(e[i - 1] / e[i]));
    return out;
}

inline Json array_of(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

} // namespace detail

/// 1: J^2 = -Id for standard and conjugated galleries, q(standard) = 0, and the
/// equivalence u_y = J u_x <=> dbar u = q d u on random (p, a).
inline Criterion structure_algebra(const Options& o) {
    Criterion c{1, "structure algebra"};
    std::mt19937_64 rng(o.seed);
    double j2 = 0.0, equiv = 0.0;
    bool q_zero = true;
    for (int n : {1, 2}) {
        const int d = 2 * n;
        std::vector<StructureField> fields;
        for (double eps : {0.0, 0.05, 0.1}) {
            GalleryParams gp;
            gp.n = n;
            gp.epsilon = eps;
            fields.push_back(gallery(eps == 0.0 ? "standard" : "conjugated", gp));
        }
        const Mat jst = ComplexConvention{n}.jst();
        for (int s = 0; s < 1000; ++s) {
            const Vec p = detail::random_in_ball(rng, d, 1.0);
            const Vec a = detail::random_in_ball(rng, d, 1.0);
            for (const auto& J : fields) {
                const Mat m = J(p);
                j2 = std::max(j2, (m * m + Mat::Identity(d, d)).cwiseAbs().maxCoeff());
                const Mat q = q_matrix(J, p);
                if (J.name == "standard" && (q.array() != 0.0).any()) q_zero = false;
                // Forward: u_x = a, u_y = J a satisfies dbar u = q d u.
                const Vec uy = m * a;
                const Vec dbar = 0.5 * (a + times_i(uy)), dz = 0.5 * (a - times_i(uy));
                equiv = std::max(equiv, (dbar - q * dz).norm());
                // Backward: solving the q-form for u_y recovers J a.
                const Mat lhs = (Mat::Identity(d, d) + q) * jst;
                const Vec back = lhs.fullPivLu().solve((q - Mat::Identity(d, d)) * a);
                equiv = std::max(equiv, (back - uy).norm());
            }
        }
    }
    c.measured = {{"max_J2_plus_Id", j2}, {"q_standard_exactly_zero", q_zero}, {"max_equivalence_residual", equiv}};
    c.pass = j2 < 1e-12 && q_zero && equiv < 1e-10;
    return c;
}

/// 2: Cauchy-Green residuals for 1, Re z, z at N = 33, 65, 129 and P(1) = conj z.
inline Criterion cauchy_green(const Options&) {
    Criterion c{2, "Cauchy-Green operator"};
    const std::vector<int> Ns{33, 65, 129};
    const std::vector<std::pair<std::string, std::function<Complex(Complex)>>> phis{
        {"1", [](Complex) { return Complex{1.0, 0.0}; }},
        {"Re z", [](Complex z) { return Complex{z.real(), 0.0}; }},
        {"z", [](Complex z) { return z; }},
    };
    std::vector<std::vector<double>> res(phis.size());
    double conj_err = 0.0;
    for (int N : Ns) {
        const GridPtr g = make_grid(1.0, N);
        const auto op = cg_shared(g);
        for (std::size_t i = 0; i < phis.size(); ++i)
            res[i].push_back(cg_residual(*op, detail::complex_field(g, phis[i].second)));
        if (N == 129) {
            const DiskMap p1 = cg_apply(*op, detail::complex_field(g, phis[0].second));
            for (std::size_t k : g->interior_nodes()) {
                const Complex z = std::conj(g->node(k));
                conj_err = std::max(conj_err, std::hypot(p1.values(0, k) - z.real(), p1.values(1, k) - z.imag()));
            }
        }
    }
    constexpr double floor = 1e-10;
    bool pass = conj_err < 5e-2;
    Json per = Json::object();
    for (std::size_t i = 0; i < phis.size(); ++i) {
        const auto ord = detail::orders(res[i]);
        bool ok = res[i][1] < 5e-2;
        const bool at_floor = *std::max_element(res[i].begin(), res[i].end()) < floor;
        for (double q : ord) ok = ok && (q >= 1.0 || at_floor);
        pass = pass && ok;
        per[phis[i].first] = {{"residual", detail::array_of(res[i])}, {"order", detail::array_of(ord)},
                              {"below_rounding_floor", at_floor}};
    }
    c.measured = {{"N", Ns}, {"phi", per}, {"rounding_floor", floor}, {"sup_error_P1_vs_conj_z_N129", conj_err}};
    c.pass = pass;
    return c;
}

/// 3: two_point_disk for the standard structure reproduces the affine disk.
inline Criterion integrable_reduction(const Options& o) {
    Criterion c{3, "integrable reduction"};
    std::mt19937_64 rng(o.seed + 3);
    GalleryParams gp;
    const StructureField J = gallery("standard", gp);
    SolverConfig cfg;
    double dev = 0.0, endpoint = 0.0;
    int cases = 0;
    for (int s = 0; s < 20; ++s) {
        const Vec p = detail::random_in_ball(rng, 2, 1.0), q = detail::random_in_ball(rng, 2, 1.0);
        for (double t : {0.5, 0.25}) {
            const DiskSolution sol = two_point_disk(J, p, q, t, cfg);
            const DiskMap h = affine_target(p, q, t, sol.v.grid);
            dev = std::max(dev, sup_distance(sol.v, h));
            endpoint = std::max({endpoint, (sol.v.at(sol.v.grid->origin()) - p).norm(),
                                 (eval_interp(sol.v, {t, 0.0}) - q).norm()});
            ++cases;
        }
    }
    c.measured = {{"cases", cases}, {"max_sup_u_minus_h", dev}, {"max_endpoint_error", endpoint}};
    c.pass = dev < 1e-12 && endpoint < 1e-12;
    return c;
}

/// 4: conjugated(0.1), eps = 0.05: contraction, endpoints and residual order.
inline Criterion nonintegrable_solve(const Options&) {
    Criterion c{4, "non-integrable solve"};
    GalleryParams gp;
    gp.epsilon = 0.1;
    const StructureField J = gallery("conjugated", gp);
    SolverConfig cfg;
    cfg.epsilon = 0.05;
    Vec p(2), q(2);
    p << 0.6, -0.3;
    q << -0.5, 0.7;
    std::vector<double> res;
    int iters = 0;
    double max_ratio = 0.0;
    for (int N : {33, 65, 129}) {
        SolverConfig k = cfg;
        k.grid_n = N;
        const DiskSolution s = picard_solve(J, k, affine_target(p, q, 0.5, make_grid(1.0, N)));
        res.push_back(s.residual);
        if (N == 65) {
            iters = s.iterations;
            for (double r : s.contraction_ratios()) max_ratio = std::max(max_ratio, r);
        }
    }
    Vec a = Vec::Zero(2), b(2);
    b << 0.1, 0.0;
    const DiskSolution tp = two_point_disk(J, a, b, 0.5, cfg);
    const double endpoint = std::max((tp.v.at(tp.v.grid->origin()) - a).norm(), (eval_interp(tp.v, {0.5, 0.0}) - b).norm());
    const auto ord = detail::orders(res);
    c.measured = {{"iterations_N65", iters},         {"max_contraction_ratio_N65", max_ratio},
                  {"two_point_endpoint_error", endpoint}, {"two_point_newton_steps", tp.newton_steps},
                  {"cr_residual", detail::array_of(res)}, {"cr_order", detail::array_of(ord)}};
    c.pass = iters <= 50 && max_ratio <= 0.9 && endpoint < 1e-6 && res[1] < 1e-3 &&
             std::all_of(ord.begin(), ord.end(), [](double x) { return x >= 1.0; });
    return c;
}

/// 5: standard chart, upper bound <= arctanh(0.05) and monotone in t refinement.
inline Criterion kobayashi_upper_bound(const Options& o) {
    Criterion c{5, "Kobayashi upper bound"};
    std::mt19937_64 rng(o.seed + 5);
    GalleryParams gp;
    const StructureField J = gallery("standard", gp);
    const std::vector<std::vector<double>> grids{{0.5}, {0.5, 0.25}, {0.5, 0.25, 0.1}, {0.5, 0.25, 0.1, 0.05}};
    const double bound = std::atanh(0.05) + 1e-9;
    bool pass = true;
    double worst = 0.0;
    Json pairs = Json::array();
    for (int s = 0; s < 10; ++s) {
        const Vec p = detail::random_in_ball(rng, 2, 1.0), q = detail::random_in_ball(rng, 2, 1.0);
        std::vector<double> uppers;
        for (const auto& ts : grids) {
            DistanceOptions opt;
            opt.k_max = 2;
            opt.t_grid = ts;
            uppers.push_back(estimate_distance(J, J.domain, p, q, opt).upper);
        }
        for (std::size_t i = 1; i < uppers.size(); ++i) pass = pass && uppers[i] <= uppers[i - 1];
        worst = std::max(worst, uppers.back());
        pairs.push_back(detail::array_of(uppers));
    }
    c.measured = {{"t_min_per_refinement", {0.5, 0.25, 0.1, 0.05}}, {"upper_per_pair", pairs},
                  {"max_final_upper", worst}, {"bound", bound}};
    c.pass = pass && worst <= bound;
    return c;
}

/// 6: push-forward preserves chain cost; composed links stay holomorphic.
inline Criterion distance_decreasing(const Options&) {
    Criterion c{6, "distance decreasing"};
    GalleryParams gp;
    const StructureField torus = gallery("torus-flat", gp);
    const StructureField chart = gallery("standard", gp);
    DistanceOptions opt;
    opt.k_max = 2;
    opt.t_grid = {0.25, 0.5};
    Vec p(2), q(2), shift(2);
    p << 0.1, 0.2;
    q << 0.6, -0.1;
    shift << 0.37, -1.25;
    const Chain ct = estimate_distance(torus, torus.domain, p, q, opt).best_chain;
    const Chain pt = pushforward_chain(ct, translation_map(shift), torus, torus.domain);
    Mat A(2, 2);
    A << 1.5, -0.5, 0.5, 1.5;  // multiplication by 1.5 + 0.5i
    Vec pc(2), qc(2);
    pc << -0.3, 0.4;
    qc << 0.5, 0.2;
    const Chain cc = estimate_distance(chart, chart.domain, pc, qc, opt).best_chain;
    const Chain pcc = pushforward_chain(cc, linear_map(A), chart, DomainDescriptor::chart_ball(Vec::Zero(2), 2.0));
    const double dt = std::abs(chain_cost(pt) - chain_cost(ct)), dc = std::abs(chain_cost(pcc) - chain_cost(cc));
    double res = 0.0;
    for (const Chain* ch : {&pt, &pcc})
        for (const auto& l : ch->links) res = std::max(res, l.disk.residual);
    c.measured = {{"translation_cost_change", dt}, {"linear_cost_change", dc}, {"max_composed_residual", res},
                  {"torus_chain_cost", chain_cost(ct)}, {"chart_chain_cost", chain_cost(cc)}};
    c.pass = dt <= 1e-15 && dc <= 1e-15 && res < 1e-3;
    return c;
}

/// 7: derivative bound on the unit chart ball (~1) and on the flat torus (unbounded).
inline Criterion derivative_indicator(const Options&) {
    Criterion c{7, "derivative supremum indicator"};
    GalleryParams gp;
    const StructureField chart = gallery("standard", gp);
    const StructureField torus = gallery("torus-flat", gp);
    SolverConfig cfg;
    Vec nu(2);
    nu << 1.0, 0.0;
    const BoundReport b = derivative_bound(chart, chart.domain, Vec::Zero(2), nu, 10.0, cfg);
    const BoundReport t = derivative_bound(torus, torus.domain, Vec::Zero(2), nu, 1e3, cfg);
    c.measured = {{"chart_ball_bound", b.lower}, {"chart_ball_probes", b.probes.size()}, {"torus_bound", t.lower},
                  {"torus_unbounded_suspected", t.unbounded_suspected}};
    c.pass = std::abs(b.lower - 1.0) <= 0.05 && !b.unbounded_suspected && t.lower == 1e3 && t.unbounded_suspected;
    return c;
}

/// 8: reparametrization equalities for z + z^2 (c = 0.5) and s(1) for z^2.
inline Criterion reparametrization(const Options&) {
    Criterion c{8, "reparametrization equalities"};
    const GridPtr g = make_grid(1.0, 129);
    const DiskMap f = detail::complex_field(g, [](Complex z) { return z + z * z; });
    const ReparamResult r = brody_reparametrize(f, 0.5);
    const DiskMap sq = detail::complex_field(g, [](Complex z) { return z * z; });
    const double s = scaling_sup(sq, 1.0).value, expect = 4.0 / (3.0 * std::sqrt(3.0));
    Json z0 = r.z0 ? io::to_json(*r.z0) : Json(nullptr);
    c.measured = {{"t0", r.t0},       {"z0", z0},           {"s_at_0", r.s_at_0}, {"s_sup", r.s_sup},
                  {"tol_brody", r.tol}, {"s_of_z2", s}, {"s_of_z2_expected", expect}};
    c.pass = std::abs(r.s_sup - r.s_at_0) < 1e-3 && std::abs(r.s_at_0 - 0.5) < 1e-3 && std::abs(s - expect) < 1e-3;
    return c;
}

inline Json steps_json(const RescalingReport& rep) {
    Json a = Json::array();
    for (const auto& s : rep.steps) {
        Json j{{"n", s.n}, {"r_n", s.r_n}, {"skipped", s.skipped}};
        if (!s.skipped) {
            j["g_derivative"] = s.g_derivative;
            j["t0"] = s.t0;
            j["recentered"] = s.recentered;
            j["delta"] = s.delta ? Json(*s.delta) : Json(nullptr);
            j["c2_ratio"] = s.c2_ratio;
        }
        a.push_back(j);
    }
    return a;
}

/// 9: line extraction on the flat torus (dilations) and torus-perturbed(0.05).
inline Criterion line_extraction(const Options&) {
    Criterion c{9, "line extraction"};
    GalleryParams gp;
    const StructureField flat = gallery("torus-flat", gp);
    Vec p = Vec::Zero(2), nu(2);
    nu << 1.0, 0.0;
    ExtractOptions fo;
    fo.R = 2.0;
    fo.tol = 1e-10;
    fo.n_max = 8;
    const RescalingReport fr = extract_line(flat, dilation_family(p, nu, 65), fo);
    int deltas_until = 0;
    if (fr.converged_at)
        for (int i = 0; i <= *fr.converged_at; ++i) deltas_until += fr.steps[i].delta ? 1 : 0;
    const bool flat_ok = fr.converged && deltas_until <= 3 && std::abs(fr.line->derivative_at_0 - 1.0) <= 1e-6 &&
                         fr.line->cr_residual < 1e-10;

    gp.epsilon = 0.05;
    const StructureField pert = gallery("torus-perturbed", gp);
    SolverConfig cfg;
    cfg.epsilon = 0.1;
    ExtractOptions po;
    po.R = 1.5;
    po.tol = 1e-6;
    po.n_max = 4;
    const RescalingReport pr = extract_line(pert, derivative_ladder(pert, p, nu, 4.0, 1.0, cfg, 12.0), po);
    std::vector<double> deltas;
    for (const auto& s : pr.steps)
        if (s.delta) deltas.push_back(*s.delta);
    bool monotone = deltas.size() >= 2;
    for (std::size_t i = 1; i < deltas.size(); ++i) monotone = monotone && deltas[i] < deltas[i - 1];
    const bool pert_ok = pr.line && std::abs(pr.line->derivative_at_0 - 1.0) <= 1e-2 && pr.line->cr_residual < 1e-2 && monotone;

    c.measured = {
        {"flat", {{"converged", fr.converged}, {"deltas_until_converged", deltas_until},
                  {"derivative_at_0", fr.line ? fr.line->derivative_at_0 : 0.0},
                  {"cr_residual", fr.line ? fr.line->cr_residual : 0.0}, {"steps", steps_json(fr)}}},
        {"perturbed", {{"lambda", {4.0, 5.0, 6.0, 7.0}}, {"grid_density", 12.0},
                       {"derivative_at_0", pr.line ? pr.line->derivative_at_0 : 0.0},
                       {"cr_residual", pr.line ? pr.line->cr_residual : 0.0}, {"deltas", detail::array_of(deltas)},
                       {"deltas_decreasing", monotone}, {"steps", steps_json(pr)}}}};
    c.pass = flat_ok && pert_ok;
    return c;
}

/// Runs criteria 1-9 in order; a criterion that throws is recorded as failed.
inline std::vector<Criterion> run_all(const Options& o) {
    using Fn = Criterion (*)(const Options&);
    const std::pair<Fn, const char*> table[] = {
        {structure_algebra, "structure algebra"},     {cauchy_green, "Cauchy-Green operator"},
        {integrable_reduction, "integrable reduction"}, {nonintegrable_solve, "non-integrable solve"},
        {kobayashi_upper_bound, "Kobayashi upper bound"}, {distance_decreasing, "distance decreasing"},
        {derivative_indicator, "derivative supremum indicator"},
        {reparametrization, "reparametrization equalities"}, {line_extraction, "line extraction"},
    };
    std::vector<Criterion> out;
    int id = 1;
    for (const auto& [fn, name] : table) {
        try {
            out.push_back(fn(o));
        } catch (const std::exception& e) {
            Criterion c{id, name};
            c.measured = {{"error", e.what()}};
            out.push_back(c);
        }
        ++id;
    }
    return out;
}

inline Json to_json(const std::vector<Criterion>& cs) {
    Json a = Json::array();
    for (const auto& c : cs) a.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"measured", c.measured}});
    return a;
}

} // namespace jdisk::acceptance
