#include "jdisk/cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

using namespace jdisk;
using cli::Json;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("jdisk_test_" + name)).string();
}

struct CliRun {
    int code = -1;
    std::string out;
};

/// Runs the CLI with `args`, capturing stdout (stderr is discarded).
CliRun run_cli(const std::string& args) {
    CliRun r;
    const std::string cmd = std::string("\"") + JDISK_CLI_PATH + "\" " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::set<std::string> keys(const Json& j) {
    std::set<std::string> out;
    for (auto it = j.begin(); it != j.end(); ++it) out.insert(it.key());
    return out;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::NotConverged;   // sentinel: nothing thrown
}

} // namespace

TEST(Cli, UnknownKeysAreRejectedAtEveryLevel) {
    for (const char* text : {R"({"command": "validate", "bogus": 1})",
                             R"({"command": "validate", "structure": {"nme": "standard"}})",
                             R"({"command": "validate", "solver": {"tolerance": 1e-3}})",
                             R"({"command": "disk", "params": {"samples": 3}})",
                             R"({"command": "validate", "output": {"yaml": "x"}})"}) {
        EXPECT_EQ(kind_of([&] { cli::resolve_config(Json::parse(text)); }), ErrorKind::Config) << text;
    }
}

TEST(Cli, WrongTypesAndRangesAreRejected) {
    for (const char* text : {R"({"command": "validate", "grid": {"N": "65"}})",
                             R"({"command": "validate", "grid": {"N": 64}})",
                             R"({"command": "validate", "grid": {"N": 65.5}})",
                             R"({"command": "validate", "grid": {"r": 2.0}})",
                             R"({"command": "disk", "params": {"t": 1.5}})",
                             R"({"command": "disk", "params": {"p": [0.1]}})",
                             R"({"command": "validate", "structure": {"name": "hyperbolic"}})",
                             R"({"command": "selftest", "params": {"repeat": 3}})",
                             R"({"command": "fly"})",
                             R"([1, 2])"}) {
        EXPECT_EQ(kind_of([&] { cli::resolve_config(Json::parse(text)); }), ErrorKind::Config) << text;
    }
    EXPECT_EQ(kind_of([&] { cli::resolve_config(Json::parse(R"({"command": "disk"})"), "validate"); }),
              ErrorKind::Config);
}

TEST(Cli, DefaultsFillOmittedKeysAndPadVectors) {
    const Json cfg = cli::resolve_config(Json::parse(R"({"command": "disk", "structure": {"n": 2}})"));
    EXPECT_EQ(cfg["params"]["p"].size(), 4u);
    EXPECT_EQ(cfg["grid"]["N"], 65);
    EXPECT_EQ(cfg["solver"]["epsilon"], 0.1);
    // A resolved config resolves to itself.
    EXPECT_EQ(cli::resolve_config(cfg), cfg);
}

TEST(Cli, SchemaMatchesTheDefaults) {
    const Json schema = Json::parse(io::read_file(std::string(JDISK_SOURCE_DIR) + "/docs/config.schema.json"));
    const Json& props = schema["properties"];
    for (const auto& command : cli::commands()) {
        const Json def = cli::default_config(command);
        EXPECT_EQ(keys(props), keys(def));
        for (const char* section : {"structure", "grid", "solver", "output"}) {
            EXPECT_EQ(keys(props[section]["properties"]), keys(def[section])) << section;
            EXPECT_EQ(props[section]["additionalProperties"], false);
        }
        const Json& p = schema["$defs"]["params_" + command];
        EXPECT_EQ(keys(p["properties"]), keys(def["params"])) << command;
        EXPECT_EQ(p["additionalProperties"], false);
    }
}

TEST(Cli, ExitCodeClasses) {
    EXPECT_EQ(cli::exit_code_for(ErrorKind::Config), cli::kConfigError);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::OutsideDisk), cli::kConfigError);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::Diverged), cli::kSolverError);
    EXPECT_EQ(cli::exit_code_for(ErrorKind::NewtonFailed), cli::kSolverError);
}

TEST(CliProcess, ValidateStandard) {
    const CliRun r = run_cli("validate --structure standard --n 2 --N 33");
    ASSERT_EQ(r.code, 0) << r.out;
    const Json rep = Json::parse(r.out);
    EXPECT_EQ(rep["status"], "ok");
    EXPECT_EQ(rep["config"]["structure"]["n"], 2);
    EXPECT_EQ(rep["results"]["pass"], true);
}

TEST(CliProcess, DiskTwoPointEndpoints) {
    const std::string csv = temp_path("disk.csv");
    const CliRun r = run_cli("disk --structure conjugated --eps 0.1 --N 33 --p 0,0 --q 0.1,0 --t 0.5 --csv " + csv);
    ASSERT_EQ(r.code, 0) << r.out;
    const Json rep = Json::parse(r.out);
    EXPECT_LT(rep["results"]["endpoint_error"]["origin"].get<double>(), 1e-8);
    EXPECT_LT(rep["results"]["endpoint_error"]["t"].get<double>(), 1e-8);
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "k,i,j,x,y,x1_v,y1_v");
    std::size_t rows = 0;
    for (std::string line; std::getline(f, line);) ++rows;
    EXPECT_EQ(rows, make_grid(1.0, 33)->node_count());
    std::filesystem::remove(csv);
}

TEST(CliProcess, DistanceStandard) {
    const CliRun r = run_cli("distance --N 33 --p 0,0 --q 0.05,0 --tmin 0.05 --tmax 0.5 --t-count 10");
    ASSERT_EQ(r.code, 0) << r.out;
    const Json rep = Json::parse(r.out);
    EXPECT_NEAR(rep["results"]["upper"].get<double>(), std::atanh(0.05), 1e-12);
}

TEST(CliProcess, ConfigErrorsExitWithTwo) {
    const std::string path = temp_path("bad.json");
    io::write_file(path, R"({"command": "validate", "structure": {"name": "standard", "colour": "red"}})");
    const CliRun bad = run_cli("--config " + path);
    EXPECT_EQ(bad.code, cli::kConfigError);
    EXPECT_EQ(Json::parse(bad.out)["error"]["kind"], "Config");
    io::write_file(path, "{ not json");
    EXPECT_EQ(run_cli("--config " + path).code, cli::kConfigError);
    EXPECT_EQ(run_cli("--config /nonexistent/jdisk.json").code, cli::kConfigError);
    EXPECT_EQ(run_cli("disk --t 2").code, cli::kConfigError);
    EXPECT_EQ(run_cli("disk --N abc").code, cli::kConfigError);
    EXPECT_EQ(run_cli("validate --no-such-flag").code, cli::kConfigError);
    std::filesystem::remove(path);
}

TEST(CliProcess, ConfigFileAndFlagsAgree) {
    const std::string path = temp_path("cfg.json");
    io::write_file(path, R"({"command": "disk", "grid": {"N": 17}, "params": {"mode": "derivative", "w": [0.2, 0.1]}})");
    const CliRun a = run_cli("--config " + path);
    const CliRun b = run_cli("disk --N 17 --mode derivative --w 0.2,0.1");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    std::filesystem::remove(path);
}

TEST(CliProcess, OutputIsDeterministic) {
    const std::string args = "disk --structure conjugated --eps 0.1 --N 17 --q 0.1,0.05";
    const CliRun a = run_cli(args), b = run_cli(args);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const CliRun c = run_cli("--timestamp " + args);
    EXPECT_TRUE(Json::parse(c.out).contains("timestamp"));
}

TEST(CliProcess, ThreadCapIsReported) {
    const std::string cmd = std::string("JDISK_THREADS=3 \"") + JDISK_CLI_PATH + "\" validate --N 17 --samples 10 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    std::string out;
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
    pclose(pipe);
    EXPECT_EQ(Json::parse(out)["diagnostics"]["thread_cap"], 3);
}
