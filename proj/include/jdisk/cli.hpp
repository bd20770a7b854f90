#pragma once

// Run configuration (defaults, whitelist validation, resolution) and command
// execution for the jdisk tool. Every command produces a JSON report
// {command, status, config, results, diagnostics, versions[, error][, timestamp]}.

#include "jdisk/acceptance.hpp"
#include "jdisk/brody.hpp"
#include "jdisk/error.hpp"
#include "jdisk/io.hpp"
#include "jdisk/kobayashi.hpp"
#include "jdisk/parallel.hpp"
#include "jdisk/solver.hpp"
#include "jdisk/structure.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace jdisk::cli {

using io::Json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kCriteriaFailed = 1, kConfigError = 2, kSolverError = 3 };

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"validate", "disk", "distance", "bound", "brody", "selftest"};
    return c;
}

inline Json default_params(const std::string& command) {
    if (command == "validate") return {{"samples", 1000}};
    if (command == "disk")
        return {{"mode", "two_point"}, {"p", {0.0, 0.0}}, {"q", {0.2, 0.0}}, {"t", 0.5}, {"w", {0.5, 0.0}}};
    if (command == "distance")
        return {{"p", {0.0, 0.0}}, {"q", {0.3, 0.0}}, {"k_max", 2}, {"tmin", 0.05}, {"tmax", 0.5}, {"t_count", 10}};
    if (command == "bound")
        return {{"p", {0.0, 0.0}}, {"nu", {1.0, 0.0}}, {"lambda_max", 10.0}, {"bisect_tol", 1e-3}};
    if (command == "brody")
        return {{"family", "dilation"}, {"p", {0.0, 0.0}}, {"nu", {1.0, 0.0}}, {"lambda0", 4.0}, {"lambda_step", 1.0},
                {"density", 12.0}, {"R", 2.0},     {"tol", 1e-10},       {"n_start", 1},  {"n_max", 8},
                {"window_n", 65}};
    if (command == "selftest") return {{"repeat", 1}};
    throw Error(ErrorKind::Config, "unknown command '" + command + "'");
}

/// Fully populated configuration for a command.
inline Json default_config(const std::string& command) {
    const SolverConfig s;
    return {{"command", command},
            {"structure", {{"name", "standard"}, {"n", 1}, {"epsilon", 0.0}, {"perturbation", "sin"}, {"radius", 1.0}}},
            {"grid", {{"N", s.grid_n}, {"r", 1.0}}},
            {"solver",
             {{"epsilon", s.epsilon},
              {"tol_fixpoint", s.tol_fixpoint},
              {"max_iter", s.max_iter},
              {"tol_newton", s.tol_newton},
              {"max_newton", s.max_newton},
              {"fd_step", s.fd_step},
              {"continuation", s.continuation},
              {"divergence_window", s.divergence_window},
              {"cond_cap", s.cond_cap}}},
            {"params", default_params(command)},
            {"output", {{"json", nullptr}, {"csv", nullptr}}},
            {"seed", 20240521},
            {"timestamp", false}};
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

inline bool same_kind(const Json& def, const Json& v) {
    if (def.is_null()) return v.is_null() || v.is_string();
    if (def.is_number_integer()) return v.is_number_integer();
    if (def.is_number()) return v.is_number();
    if (def.is_array()) {
        if (!v.is_array() || v.empty()) return false;
        for (const auto& x : v)
            if (!x.is_number()) return false;
        return true;
    }
    return def.type() == v.type();
}

/// Overlays `src` onto `dst`; every key must already exist in `dst` with a
/// compatible type (the defaults double as the whitelist).
inline void overlay(Json& dst, const Json& src, const std::string& path) {
    if (!src.is_object()) config_error(path + " must be an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!dst.contains(it.key())) config_error("unknown key '" + key + "'");
        Json& slot = dst[it.key()];
        if (slot.is_object()) {
            overlay(slot, it.value(), key);
        } else {
            if (!same_kind(slot, it.value())) config_error("wrong type for '" + key + "'");
            slot = it.value();
        }
    }
}

inline Vec vec_of(const Json& a) {
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

inline void check(bool ok, const std::string& what) {
    if (!ok) config_error(what);
}

} // namespace detail

/// Merges a user configuration over the defaults of its command and checks
/// ranges. Throws Error(Config) on unknown keys, wrong types or bad values.
inline Json resolve_config(const Json& user, const std::string& command_hint = "") {
    using detail::check;
    if (!user.is_object()) detail::config_error("configuration must be a JSON object");
    std::string command = command_hint;
    if (user.contains("command")) {
        if (!user["command"].is_string()) detail::config_error("command must be a string");
        const std::string c = user["command"].get<std::string>();
        if (!command.empty() && c != command)
            detail::config_error("config file is for '" + c + "' but '" + command + "' was requested");
        command = c;
    }
    if (command.empty()) detail::config_error("no command given");
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
        detail::config_error("unknown command '" + command + "'");
    Json cfg = default_config(command);
    detail::overlay(cfg, user, "");

    const Json& st = cfg["structure"];
    const std::set<std::string> names{"standard", "conjugated", "torus-flat", "torus-perturbed"};
    check(names.count(st["name"].get<std::string>()) == 1, "structure.name must be one of standard, conjugated, torus-flat, torus-perturbed");
    const int n = st["n"].get<int>();
    check(n >= 1 && n <= 4, "structure.n must lie in 1..4");
    check(st["epsilon"].get<double>() >= 0.0, "structure.epsilon must be >= 0");
    check(st["perturbation"] == "sin" || st["perturbation"] == "linear", "structure.perturbation must be sin or linear");
    check(st["radius"].get<double>() > 0.0, "structure.radius must be positive");
    const int N = cfg["grid"]["N"].get<int>();
    check(N >= 3 && N % 2 == 1, "grid.N must be odd and >= 3");
    check(cfg["grid"]["r"].get<double>() == 1.0, "grid.r must be 1 (disks are solved on the unit disk)");
    check(cfg["seed"].get<std::int64_t>() >= 0, "seed must be non-negative");

    Json& p = cfg["params"];
    const auto dim = static_cast<std::size_t>(2 * n);
    // Vector defaults are written for n = 1; pad them with zeros for larger n.
    const bool user_params = user.contains("params") && user["params"].is_object();
    for (auto it = p.begin(); it != p.end(); ++it)
        if (it.value().is_array() && !(user_params && user["params"].contains(it.key())))
            while (it.value().size() < dim) it.value().push_back(0.0);
    auto point = [&](const char* key) {
        check(p[key].size() == dim, std::string("params.") + key + " must have " + std::to_string(dim) + " entries");
    };
    if (command == "validate") {
        check(p["samples"].get<int>() >= 0, "params.samples must be >= 0");
    } else if (command == "disk") {
        check(p["mode"] == "two_point" || p["mode"] == "derivative", "params.mode must be two_point or derivative");
        point("p");
        point("q");
        point("w");
        check(p["t"].get<double>() > 0.0 && p["t"].get<double>() < 1.0, "params.t must lie in (0, 1)");
    } else if (command == "distance") {
        point("p");
        point("q");
        check(p["k_max"].get<int>() >= 1, "params.k_max must be >= 1");
        check(p["t_count"].get<int>() >= 1, "params.t_count must be >= 1");
        const double lo = p["tmin"].get<double>(), hi = p["tmax"].get<double>();
        check(lo > 0.0 && hi < 1.0 && lo <= hi, "params.tmin/tmax must satisfy 0 < tmin <= tmax < 1");
    } else if (command == "bound") {
        point("p");
        point("nu");
        check(p["lambda_max"].get<double>() > 0.0, "params.lambda_max must be positive");
        check(p["bisect_tol"].get<double>() > 0.0, "params.bisect_tol must be positive");
    } else if (command == "brody") {
        check(p["family"] == "dilation" || p["family"] == "ladder", "params.family must be dilation or ladder");
        point("p");
        point("nu");
        check(p["R"].get<double>() > 0.0 && p["tol"].get<double>() > 0.0, "params.R and params.tol must be positive");
        check(p["lambda0"].get<double>() > 0.0 && p["lambda_step"].get<double>() >= 0.0, "params.lambda0 > 0 and lambda_step >= 0 required");
        check(p["density"].get<double>() >= 0.0, "params.density must be >= 0");
        check(p["n_start"].get<int>() >= 1 && p["n_max"].get<int>() >= p["n_start"].get<int>(), "need 1 <= n_start <= n_max");
        check(p["window_n"].get<int>() >= 3 && p["window_n"].get<int>() % 2 == 1, "params.window_n must be odd and >= 3");
    } else if (command == "selftest") {
        check(p["repeat"] == 1 || p["repeat"] == 2, "params.repeat must be 1 or 2");
    }
    return cfg;
}

inline SolverConfig solver_config(const Json& cfg) {
    const Json& s = cfg["solver"];
    SolverConfig c;
    c.epsilon = s["epsilon"].get<double>();
    c.tol_fixpoint = s["tol_fixpoint"].get<double>();
    c.max_iter = s["max_iter"].get<int>();
    c.tol_newton = s["tol_newton"].get<double>();
    c.max_newton = s["max_newton"].get<int>();
    c.fd_step = s["fd_step"].get<double>();
    c.continuation = s["continuation"].get<int>();
    c.divergence_window = s["divergence_window"].get<int>();
    c.cond_cap = s["cond_cap"].get<double>();
    c.grid_n = cfg["grid"]["N"].get<int>();
    try {
        c.validate();
    } catch (const Error& e) {
        detail::config_error(std::string("solver: ") + e.what());
    }
    return c;
}

inline StructureField structure_of(const Json& cfg) {
    const Json& s = cfg["structure"];
    GalleryParams gp;
    gp.n = s["n"].get<int>();
    gp.epsilon = s["epsilon"].get<double>();
    gp.perturbation = s["perturbation"].get<std::string>();
    gp.radius = s["radius"].get<double>();
    return gallery(s["name"].get<std::string>(), gp);
}

/// Exit code for a library error: configuration-type failures give 2, all
/// other (numerical) failures 3.
inline int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::Config:
    case ErrorKind::InvalidParams:
    case ErrorKind::UnknownName:
    case ErrorKind::InvalidGrid:
    case ErrorKind::OutsideDisk: return kConfigError;
    default: return kSolverError;
    }
}

struct Outcome {
    int code = kOk;
    std::string report;         ///< serialized JSON
    std::vector<std::string> table;   ///< selftest pass/fail lines
};

namespace detail {

inline Json solution_json(const DiskSolution& s) {
    Json ratios = Json::array();
    for (double r : s.contraction_ratios()) ratios.push_back(r);
    return {{"residual", s.residual},         {"iterations", s.iterations},
            {"newton_steps", s.newton_steps}, {"epsilon_used", s.epsilon_used},
            {"contraction_ratios", ratios},   {"grid", io::grid_json(s.v)}};
}

inline void write_csv(const Json& cfg, const DiskMap& u) {
    if (cfg["output"]["csv"].is_string()) io::write_file(cfg["output"]["csv"].get<std::string>(), io::diskmap_csv(u));
}

inline std::vector<Vec> domain_samples(const StructureField& J, std::size_t count, std::uint64_t seed) {
    std::vector<Vec> out = jdisk::detail::validation_lattice(J.domain, J.convention.dim());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int d = J.convention.dim();
    for (std::size_t i = 0; i < count; ++i) {
        Vec v(d);
        if (J.domain.is_torus()) {
            for (int k = 0; k < d; ++k) v[k] = 0.5 * (u(rng) + 1.0);
        } else {
            do {
                for (int k = 0; k < d; ++k) v[k] = u(rng);
            } while (v.norm() >= 1.0);
            v = J.domain.center + J.domain.radius * v;
        }
        out.push_back(v);
    }
    return out;
}

inline Json run_validate(const Json& cfg, Json& diag) {
    const StructureField J = structure_of(cfg);
    const auto samples = domain_samples(J, cfg["params"]["samples"].get<std::size_t>(), cfg["seed"].get<std::uint64_t>());
    const ValidationReport r = validate_structure(J, samples);
    double qmax = 0.0;
    for (const Vec& p : samples) qmax = std::max(qmax, q_matrix(J, p).cwiseAbs().maxCoeff());
    diag["smoothness"] = J.smoothness_note;
    // Quadrature quality of the Cauchy-Green operator on the configured grid.
    const GridPtr g = make_grid(1.0, cfg["grid"]["N"].get<int>());
    const auto op = cg_shared(g);
    Json cg{{"N", g->axis_count()}};
    const std::pair<const char*, std::function<Complex(Complex)>> probes[] = {
        {"residual_1", [](Complex) { return Complex{1.0, 0.0}; }},
        {"residual_re_z", [](Complex z) { return Complex{z.real(), 0.0}; }},
        {"residual_z", [](Complex z) { return z; }},
    };
    for (const auto& [key, f] : probes) cg[key] = cg_residual(*op, acceptance::detail::complex_field(g, f));
    cg["measured_gain"] = cg_measured_gain(*op);
    return {{"structure", J.name},           {"samples", r.samples},       {"max_residual", r.max_residual},
            {"tol", r.tol},                  {"pass", r.pass},             {"max_condition", r.max_condition},
            {"invalid_samples", r.invalid_samples.size()}, {"max_abs_q", qmax}, {"cauchy_green", cg}};
}

inline Json run_disk(const Json& cfg) {
    const StructureField J = structure_of(cfg);
    const SolverConfig sc = solver_config(cfg);
    const Json& p = cfg["params"];
    const Vec a = vec_of(p["p"]);
    Json out;
    DiskSolution s;
    if (p["mode"] == "two_point") {
        const Vec b = vec_of(p["q"]);
        const double t = p["t"].get<double>();
        s = two_point_disk(J, a, b, t, sc);
        out = solution_json(s);
        out["endpoint_error"] = {{"origin", (s.v.at(s.v.grid->origin()) - a).norm()},
                                 {"t", (eval_interp(s.v, {t, 0.0}) - b).norm()}};
    } else {
        const Vec w = vec_of(p["w"]);
        s = derivative_disk(J, a, w, sc);
        out = solution_json(s);
        out["endpoint_error"] = {{"origin", (s.v.at(s.v.grid->origin()) - a).norm()},
                                 {"derivative", (d_dz_at(s.v, s.v.grid->origin()) - w).norm()}};
    }
    write_csv(cfg, s.v);
    return out;
}

inline Json chain_json(const Chain& c) {
    Json links = Json::array();
    for (const auto& l : c.links)
        links.push_back({{"a", io::to_json(l.a)},
                         {"b", io::to_json(l.b)},
                         {"cost", l.cost},
                         {"start", io::to_json(l.start)},
                         {"end", io::to_json(l.end)},
                         {"residual", l.disk.residual},
                         {"newton_steps", l.disk.newton_steps}});
    Json wp = Json::array();
    for (const Vec& w : c.waypoints) wp.push_back(io::to_json(w));
    return {{"links", links}, {"waypoints", wp}, {"total_cost", c.total_cost()}};
}

inline Json run_distance(const Json& cfg) {
    const StructureField J = structure_of(cfg);
    const Json& p = cfg["params"];
    DistanceOptions opt;
    opt.cfg = solver_config(cfg);
    opt.k_max = p["k_max"].get<int>();
    opt.t_grid = t_grid_between(p["tmin"].get<double>(), p["tmax"].get<double>(), p["t_count"].get<int>());
    const DistanceEstimate e = estimate_distance(J, J.domain, vec_of(p["p"]), vec_of(p["q"]), opt);
    Json log = Json::array();
    for (const auto& s : e.search_log) {
        Json j{{"k", s.k}, {"link", s.link}, {"t", s.t}, {"success", s.success}, {"cost", s.cost}};
        if (!s.success) j["error"] = s.error;
        log.push_back(j);
    }
    Json ts = Json::array();
    for (double t : opt.t_grid) ts.push_back(t);
    return {{"upper", e.upper}, {"best_k", e.best_k.value_or(0)}, {"t_grid", ts},
            {"best_chain", chain_json(e.best_chain)}, {"search_log", log}};
}

inline Json run_bound(const Json& cfg) {
    const StructureField J = structure_of(cfg);
    const Json& p = cfg["params"];
    const BoundReport r = derivative_bound(J, J.domain, vec_of(p["p"]), vec_of(p["nu"]), p["lambda_max"].get<double>(),
                                           solver_config(cfg), p["bisect_tol"].get<double>());
    Json probes = Json::array();
    for (const auto& b : r.probes) {
        Json j{{"lambda", b.lambda}, {"feasible", b.feasible}};
        if (!b.reason.empty()) j["reason"] = b.reason;
        probes.push_back(j);
    }
    return {{"lower", r.lower}, {"unbounded_suspected", r.unbounded_suspected}, {"bisect_tol", r.bisect_tol},
            {"probes", probes}};
}

inline Json run_brody(const Json& cfg, Json& diag, Json& error) {
    const StructureField J = structure_of(cfg);
    const Json& p = cfg["params"];
    const Vec base = vec_of(p["p"]), nu = vec_of(p["nu"]);
    const SolverConfig sc = solver_config(cfg);
    const std::function<DiskMap(int)> family =
        p["family"] == "dilation"
            ? dilation_family(base, nu, sc.grid_n)
            : derivative_ladder(J, base, nu, p["lambda0"].get<double>(), p["lambda_step"].get<double>(), sc,
                                p["density"].get<double>());
    ExtractOptions o;
    o.R = p["R"].get<double>();
    o.tol = p["tol"].get<double>();
    o.n_start = p["n_start"].get<int>();
    o.n_max = p["n_max"].get<int>();
    o.window_n = p["window_n"].get<int>();
    const RescalingReport rep = extract_line(J, family, o);
    diag["interpolation"] = "cubic";
    Json out{{"converged", rep.converged}, {"steps", acceptance::steps_json(rep)}};
    if (rep.converged_at) out["converged_at_step"] = rep.steps[static_cast<std::size_t>(*rep.converged_at)].n;
    if (rep.line) {
        out["line"] = {{"derivative_at_0", rep.line->derivative_at_0},
                       {"cr_residual", rep.line->cr_residual},
                       {"converged", rep.line->converged},
                       {"achieved_delta", rep.line->achieved_delta},
                       {"grid", io::grid_json(rep.line->samples)}};
        write_csv(cfg, rep.line->samples);
    }
    if (!rep.converged) error = {{"kind", std::string(to_string(ErrorKind::NotConverged))}, {"message", rep.message}};
    return out;
}

inline Json run_selftest(const Json& cfg, std::vector<std::string>& table, int& code) {
    acceptance::Options o;
    o.seed = cfg["seed"].get<std::uint64_t>();
    const int repeat = cfg["params"]["repeat"].get<int>();
    const auto first = acceptance::run_all(o);
    Json criteria = acceptance::to_json(first);
    bool all = true;
    for (const auto& c : first) {
        table.push_back("criterion " + std::to_string(c.id) + " " + (c.pass ? "PASS" : "FAIL") + "  " + c.name);
        all = all && c.pass;
    }
    Json determinism{{"id", 10}, {"name", "determinism"}};
    if (repeat == 2) {
        cg_cache_clear();
        const bool same = io::dump_json(acceptance::to_json(acceptance::run_all(o))) == io::dump_json(criteria);
        determinism["pass"] = same;
        determinism["measured"] = {{"runs", 2}, {"identical", same}};
        table.push_back(std::string("criterion 10 ") + (same ? "PASS" : "FAIL") + "  determinism");
        all = all && same;
    } else {
        determinism["pass"] = nullptr;
        determinism["measured"] = {{"runs", 1}, {"note", "set params.repeat = 2, or diff two reports"}};
        table.push_back("criterion 10 SKIP  determinism (single run)");
    }
    criteria.push_back(determinism);
    if (!all) code = kCriteriaFailed;
    return {{"all_pass", all}, {"criteria", criteria}};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

inline Json versions() {
    return {{"jdisk", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

/// Executes a resolved configuration. Library errors are caught and recorded
/// in the report; the exit code reflects their class.
inline Outcome run(const Json& cfg) {
    Outcome out;
    const std::string command = cfg["command"].get<std::string>();
    Json report{{"command", command}, {"status", "ok"}, {"config", cfg}};
    Json diag{{"thread_cap", thread_cap()}, {"interpolation", "bilinear"}};
    Json results = Json::object();
    try {
        if (command == "validate") results = detail::run_validate(cfg, diag);
        else if (command == "disk") results = detail::run_disk(cfg);
        else if (command == "distance") results = detail::run_distance(cfg);
        else if (command == "bound") results = detail::run_bound(cfg);
        else if (command == "brody") {
            Json soft;
            results = detail::run_brody(cfg, diag, soft);
            if (!soft.is_null()) {
                out.code = kSolverError;
                report["status"] = "error";
                report["error"] = soft;
            }
        }
        else results = detail::run_selftest(cfg, out.table, out.code);
    } catch (const Error& e) {
        out.code = exit_code_for(e.kind());
        report["status"] = "error";
        report["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
    }
    report["results"] = results;
    report["diagnostics"] = diag;
    report["versions"] = versions();
    if (cfg["timestamp"].get<bool>()) report["timestamp"] = detail::utc_timestamp();
    out.report = io::dump_json(report);
    return out;
}

/// A report for a configuration that could not be resolved.
inline std::string config_error_report(const std::string& command, const std::string& message) {
    Json report{{"command", command.empty() ? Json(nullptr) : Json(command)},
                {"status", "error"},
                {"error", {{"kind", "Config"}, {"message", message}}},
                {"versions", versions()}};
    return io::dump_json(report);
}

} // namespace jdisk::cli
