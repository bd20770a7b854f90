// jdisk: command-line front end. Flags and --config files are merged into one
// JSON configuration, validated, executed, and reported as JSON.

#include "jdisk/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using jdisk::io::Json;

/// "0.1,-0.2" -> [0.1, -0.2]
Json parse_vector(const std::string& text) {
    Json a = Json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw jdisk::Error(jdisk::ErrorKind::Config, "bad number list '" + text + "'");
        a.push_back(v);
    }
    if (a.empty()) throw jdisk::Error(jdisk::ErrorKind::Config, "empty number list");
    return a;
}

/// Inline flag values, kept as strings until the command is known.
struct Flags {
    std::map<std::string, std::string> values;   // json path -> text
    std::map<std::string, char> kinds;           // 'i' int, 'd' double, 's' string, 'v' vector

    void add(CLI::App* app, const std::string& flag, const std::string& path, char kind, const std::string& help) {
        kinds[path] = kind;
        app->add_option_function<std::string>(flag, [this, path](const std::string& v) { values[path] = v; }, help);
    }

    /// Writes the collected values into `cfg` (nested by dotted path).
    void apply(Json& cfg) const {
        for (const auto& [path, text] : values) {
            Json* slot = &cfg;
            std::stringstream ss(path);
            std::string part;
            std::vector<std::string> parts;
            while (std::getline(ss, part, '.')) parts.push_back(part);
            for (std::size_t i = 0; i + 1 < parts.size(); ++i) slot = &(*slot)[parts[i]];
            Json& leaf = (*slot)[parts.back()];
            switch (kinds.at(path)) {
            case 'i':
                try {
                    std::size_t used = 0;
                    const long long v = std::stoll(text, &used);
                    if (used != text.size()) throw std::invalid_argument(text);
                    leaf = v;
                } catch (const std::exception&) {
                    throw jdisk::Error(jdisk::ErrorKind::Config, "bad integer for " + path + ": '" + text + "'");
                }
                break;
            case 'd': {
                const Json v = parse_vector(text);
                if (v.size() != 1) throw jdisk::Error(jdisk::ErrorKind::Config, "expected one number for " + path);
                leaf = v[0];
                break;
            }
            case 'v': leaf = parse_vector(text); break;
            default: leaf = text; break;
            }
        }
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"jdisk: J-holomorphic disks, Kobayashi chains and Brody rescaling"};
    app.fallthrough();
    app.require_subcommand(0, 1);
    std::string config_file;
    bool timestamp = false;
    Flags flags;
    app.add_option("--config", config_file, "JSON configuration file");
    app.add_flag("--timestamp", timestamp, "add a timestamp field to the report");
    flags.add(&app, "--structure", "structure.name", 's', "standard | conjugated | torus-flat | torus-perturbed");
    flags.add(&app, "--n", "structure.n", 'i', "complex dimension");
    flags.add(&app, "--eps", "structure.epsilon", 'd', "perturbation strength of the structure");
    flags.add(&app, "--perturbation", "structure.perturbation", 's', "sin | linear");
    flags.add(&app, "--radius", "structure.radius", 'd', "chart ball radius");
    flags.add(&app, "--N", "grid.N", 'i', "grid nodes per axis (odd)");
    flags.add(&app, "--r", "grid.r", 'd', "disk radius");
    flags.add(&app, "--solver-eps", "solver.epsilon", 'd', "fixed-point scaling epsilon");
    flags.add(&app, "--tol-fixpoint", "solver.tol_fixpoint", 'd', "Picard tolerance");
    flags.add(&app, "--max-iter", "solver.max_iter", 'i', "Picard iteration cap");
    flags.add(&app, "--tol-newton", "solver.tol_newton", 'd', "outer solve tolerance");
    flags.add(&app, "--max-newton", "solver.max_newton", 'i', "outer iteration cap");
    flags.add(&app, "--seed", "seed", 'i', "seed for randomized sampling");
    flags.add(&app, "--json", "output.json", 's', "write the JSON report here instead of stdout");
    flags.add(&app, "--csv", "output.csv", 's', "write a DiskMap CSV here");

    std::map<std::string, CLI::App*> sub;
    sub["validate"] = app.add_subcommand("validate", "check J^2 = -Id over the domain");
    sub["disk"] = app.add_subcommand("disk", "solve a two-point or derivative disk");
    sub["distance"] = app.add_subcommand("distance", "upper bound on the Kobayashi pseudo-distance");
    sub["bound"] = app.add_subcommand("bound", "derivative supremum indicator");
    sub["brody"] = app.add_subcommand("brody", "rescaling and line extraction");
    sub["selftest"] = app.add_subcommand("selftest", "run the acceptance suite");
    for (auto& [name, s] : sub) s->fallthrough();

    flags.add(sub["validate"], "--samples", "params.samples", 'i', "random samples besides the lattice");
    flags.add(sub["disk"], "--mode", "params.mode", 's', "two_point | derivative");
    for (const char* cmd : {"disk", "distance"}) {
        flags.add(sub[cmd], "--p", "params.p", 'v', "first point, comma separated");
        flags.add(sub[cmd], "--q", "params.q", 'v', "second point, comma separated");
    }
    flags.add(sub["disk"], "--t", "params.t", 'd', "interpolation node in (0, 1)");
    flags.add(sub["disk"], "--w", "params.w", 'v', "derivative at 0 (derivative mode)");
    flags.add(sub["distance"], "--k-max", "params.k_max", 'i', "largest number of links");
    flags.add(sub["distance"], "--tmin", "params.tmin", 'd', "smallest t in the grid");
    flags.add(sub["distance"], "--tmax", "params.tmax", 'd', "largest t in the grid");
    flags.add(sub["distance"], "--t-count", "params.t_count", 'i', "number of t values");
    for (const char* cmd : {"bound", "brody"}) {
        flags.add(sub[cmd], "--p", "params.p", 'v', "base point");
        flags.add(sub[cmd], "--nu", "params.nu", 'v', "unit direction");
    }
    flags.add(sub["bound"], "--lambda-max", "params.lambda_max", 'd', "largest derivative probed");
    flags.add(sub["bound"], "--bisect-tol", "params.bisect_tol", 'd', "bisection tolerance");
    flags.add(sub["brody"], "--family", "params.family", 's', "dilation | ladder");
    flags.add(sub["brody"], "--lambda0", "params.lambda0", 'd', "first ladder derivative");
    flags.add(sub["brody"], "--lambda-step", "params.lambda_step", 'd', "ladder increment");
    flags.add(sub["brody"], "--density", "params.density", 'd', "ladder grid intervals per unit of lambda");
    flags.add(sub["brody"], "--R", "params.R", 'd', "comparison window radius");
    flags.add(sub["brody"], "--tol", "params.tol", 'd', "delta tolerance");
    flags.add(sub["brody"], "--n-start", "params.n_start", 'i', "first family index");
    flags.add(sub["brody"], "--n-max", "params.n_max", 'i', "last family index");
    flags.add(sub["brody"], "--window-n", "params.window_n", 'i', "window grid nodes per axis");
    flags.add(sub["selftest"], "--repeat", "params.repeat", 'i', "1, or 2 to check determinism in-process");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : jdisk::cli::kConfigError;
    }

    std::string command;
    for (const auto& [name, s] : sub)
        if (s->parsed()) command = name;

    Json cfg;
    try {
        Json user = Json::object();
        if (!config_file.empty()) {
            try {
                user = Json::parse(jdisk::io::read_file(config_file));
            } catch (const Json::parse_error& e) {
                throw jdisk::Error(jdisk::ErrorKind::Config, config_file + ": " + e.what());
            }
        }
        flags.apply(user);
        if (timestamp) user["timestamp"] = true;
        cfg = jdisk::cli::resolve_config(user, command);
    } catch (const jdisk::Error& e) {
        std::cerr << "jdisk: " << e.what() << '\n';
        std::cout << jdisk::cli::config_error_report(command, e.what());
        return jdisk::cli::kConfigError;
    }

    const jdisk::cli::Outcome out = jdisk::cli::run(cfg);
    const bool to_file = cfg["output"]["json"].is_string();
    for (const auto& line : out.table) (to_file ? std::cout : std::cerr) << line << '\n';
    if (to_file) {
        try {
            jdisk::io::write_file(cfg["output"]["json"].get<std::string>(), out.report);
        } catch (const jdisk::Error& e) {
            std::cerr << "jdisk: " << e.what() << '\n';
            return jdisk::cli::kConfigError;
        }
    } else {
        std::cout << out.report;
    }
    if (out.code != 0) {
        const Json rep = Json::parse(out.report);
        if (rep.contains("error")) std::cerr << "jdisk: " << rep["error"]["message"].get<std::string>() << '\n';
    }
    return out.code;
}
