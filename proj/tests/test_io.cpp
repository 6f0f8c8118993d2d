#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "exflow/io.hpp"

using namespace exflow;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path d = fs::temp_directory_path() / ("exflow_io_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "run.cfg";
    std::ofstream out(p);
    out << body;
    return p;
}

const std::string kFlowingConfig =
    "# small inflow reference data\n"
    "parameters.n = 3\n"
    "parameters.R_gas = 1\n"
    "parameters.c_V = 1.5\n"
    "parameters.nu = 0.5\n"
    "parameters.lambda = 0\n"
    "parameters.kappa = 1\n"
    "parameters.v_plus = 1\n"
    "parameters.theta_plus = 1\n"
    "parameters.u_minus = 1e-3\n"
    "parameters.eta_minus = 1e-3\n"
    "parameters.chi_minus = 1e-3\n"
    "grid.r_max = 100\n"
    "grid.N = 1024\n";

const std::string kImpermeableConfig =
    "parameters.n = 3\n"
    "parameters.R_gas = 1\n"
    "parameters.c_V = 1.5\n"
    "parameters.nu = 0.5\n"
    "parameters.lambda = 0\n"
    "parameters.kappa = 1\n"
    "parameters.v_plus = 1\n"
    "parameters.theta_plus = 1\n"
    "parameters.u_minus = 0\n"
    "parameters.eta_minus = 0\n"
    "parameters.theta_minus = 1.2\n"
    "grid.r_max = 100\n"
    "grid.N = 1024\n";

} // namespace

TEST_CASE("config parsing fills fields and keeps defaults") {
    const fs::path dir = fresh_dir("parse");
    const fs::path cfg = write_config(
        dir, kFlowingConfig + "control.tol = 1e-11\ncontrol.max_iter = 50\n");
    const RunSpec spec = parse_config(cfg.string());
    CHECK(spec.params.n == 3);
    CHECK(spec.params.u_minus == 1e-3);
    CHECK(spec.grid.r_max == 100.0);
    CHECK(spec.grid.nodes == 1024);
    CHECK(spec.control.tol == 1e-11);
    CHECK(spec.control.max_iter == 50);

    const RunSpec defaults = parse_config(
        write_config(fresh_dir("parse_default"),
                     kFlowingConfig.substr(0, kFlowingConfig.find("grid.")))
            .string());
    CHECK(defaults.grid.r_max == 200.0);
    CHECK(defaults.grid.nodes == 4096);
    CHECK(defaults.control.tol == 1e-10);
}

TEST_CASE("config parsing reports the offending line and field") {
    const fs::path dir = fresh_dir("parse_err");
    auto msg_of = [&](const std::string& body) {
        try {
            parse_config(write_config(dir, body).string());
            return std::string("no error");
        } catch (const std::exception& e) {
            return std::string(e.what());
        }
    };
    CHECK_THAT(msg_of(kFlowingConfig + "parameters.zeta = 1\n"),
               Catch::Matchers::ContainsSubstring("unknown field") &&
                   Catch::Matchers::ContainsSubstring("line 15"));
    CHECK_THAT(msg_of(kFlowingConfig + "control.tol = fast\n"),
               Catch::Matchers::ContainsSubstring("not a number"));
    CHECK_THAT(msg_of(kFlowingConfig + "grid.N = 2.5\n"),
               Catch::Matchers::ContainsSubstring("positive integer"));
    CHECK_THAT(msg_of(kFlowingConfig + "grid.r_max 150\n"),
               Catch::Matchers::ContainsSubstring("key = value"));
    CHECK_THAT(msg_of(kFlowingConfig + "grid.r_max = 150 extra\n"),
               Catch::Matchers::ContainsSubstring("trailing"));
    CHECK_THAT(msg_of(kFlowingConfig + "parameters.u_plus = 1\n"),
               Catch::Matchers::ContainsSubstring("u_plus"));
    CHECK_THAT(msg_of(kFlowingConfig + "grid.N = 20000000\n"),
               Catch::Matchers::ContainsSubstring("1e7"));
    CHECK_THAT(msg_of(kFlowingConfig + "control.tol = 1e-15\n"),
               Catch::Matchers::ContainsSubstring("1e-14"));
    CHECK_THROWS_AS(parse_config((dir / "missing.cfg").string()), ConfigError);
}

TEST_CASE("profile and report files round-trip bit-exactly") {
    const fs::path dir = fresh_dir("roundtrip");
    const RunSpec spec =
        parse_config(write_config(dir, kFlowingConfig).string());
    const DerivedConstants d = derive_constants(spec.params);
    const GridPtr g = spec_grid(spec, d);
    IterationControl ctl;
    const StationarySolution sol = solve_stationary(spec.params, d, g, ctl);
    REQUIRE(sol.converged);
    const PhysicalProfile prof = reconstruct_physical(sol, spec.params);

    const std::string path = (dir / "profile.txt").string();
    write_profile(prof, path);
    const PhysicalProfile back = read_profile(path, g, spec.params);
    for (std::size_t i = 0; i < g->size(); ++i) {
        REQUIRE(back.rho[i] == prof.rho[i]);
        REQUIRE(back.u[i] == prof.u[i]);
        REQUIRE(back.theta[i] == prof.theta[i]);
        REQUIRE(back.pressure[i] == prof.pressure[i]);
        REQUIRE(back.eta[i] == prof.eta[i]);
        REQUIRE(back.chi[i] == prof.chi[i]);
        REQUIRE(back.zeta[i] == prof.zeta[i]);
    }

    const std::map<std::string, std::string> kv = {
        {"alpha", fmt(sol.state.alpha)}, {"result", "pass"}};
    write_report(kv, (dir / "rep.txt").string());
    CHECK(read_report((dir / "rep.txt").string()) == kv);
}

TEST_CASE("solve writes artifacts, manifest checksums match, runs are deterministic") {
    const fs::path dir = fresh_dir("solve");
    const RunSpec spec =
        parse_config(write_config(dir, kFlowingConfig).string());

    const fs::path out1 = dir / "a", out2 = dir / "b";
    REQUIRE(cmd_solve(spec, out1, true) == 0);
    REQUIRE(cmd_solve(spec, out2, true) == 0);
    for (const char* f : {"profile.txt", "convergence.txt", "manifest.txt"}) {
        CHECK(fs::exists(out1 / f));
        CHECK(fs::exists(out2 / f));
    }

    const auto man = read_report((out1 / "manifest.txt").string());
    REQUIRE(man.count("artifact.profile.txt.fnv1a") == 1);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(
                      file_checksum((out1 / "profile.txt").string())));
    CHECK(man.at("artifact.profile.txt.fnv1a") == buf);
    CHECK(man.at("solve.converged") == "1");
    CHECK(man.count("timing.solve.seconds") == 1);

    // identical spec, identical profile bytes
    CHECK(file_checksum((out1 / "profile.txt").string()) ==
          file_checksum((out2 / "profile.txt").string()));

    // the convergence log carries one increment per iteration
    std::ifstream log(out1 / "convergence.txt");
    std::string line;
    std::getline(log, line);
    CHECK_THAT(line, Catch::Matchers::ContainsSubstring("increment"));
    std::size_t rows = 0;
    while (std::getline(log, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == static_cast<std::size_t>(std::stoi(man.at("solve.iterations"))));
}

TEST_CASE("iteration budget of one yields exit 2 with artifacts on disk") {
    const fs::path dir = fresh_dir("budget");
    RunSpec spec = parse_config(write_config(dir, kFlowingConfig).string());
    spec.control.max_iter = 1;
    CHECK(cmd_solve(spec, dir / "out", true) == 2);
    CHECK(fs::exists(dir / "out" / "profile.txt"));
    CHECK(fs::exists(dir / "out" / "manifest.txt"));
    const auto man = read_report((dir / "out" / "manifest.txt").string());
    CHECK(man.at("solve.converged") == "0");
}

TEST_CASE("impermeable solve is marked closed-form and verifies clean") {
    const fs::path dir = fresh_dir("wall");
    const RunSpec spec =
        parse_config(write_config(dir, kImpermeableConfig).string());
    REQUIRE(cmd_solve(spec, dir / "out", true) == 0);

    std::ifstream log(dir / "out" / "convergence.txt");
    std::string line;
    std::getline(log, line);
    CHECK(line == "closed-form");

    REQUIRE(cmd_verify(spec, (dir / "out" / "profile.txt").string(),
                       dir / "out", true) == 0);
    const auto rep = read_report((dir / "out" / "report.txt").string());
    CHECK(rep.at("check.oracle") == "not-applicable");
    CHECK(rep.at("check.lemma31") == "not-applicable");
    CHECK(rep.at("check.residual") == "pass");
    CHECK(rep.at("verify.result") == "pass");
}

TEST_CASE("verify passes on a genuine solution and reports its findings") {
    const fs::path dir = fresh_dir("verify");
    const RunSpec spec =
        parse_config(write_config(dir, kFlowingConfig).string());
    REQUIRE(cmd_solve(spec, dir / "out", true) == 0);
    REQUIRE(cmd_verify(spec, (dir / "out" / "profile.txt").string(),
                       dir / "out", true) == 0);
    const auto rep = read_report((dir / "out" / "report.txt").string());
    CHECK(rep.at("verify.result") == "pass");
    CHECK(rep.at("check.residual") == "pass");
    CHECK(rep.at("check.oracle") == "pass");
    CHECK(rep.at("bounds.lemma31.holds") == "true");
    REQUIRE(rep.count("decay.eta.exponent") == 1);
    CHECK(std::stod(rep.at("decay.eta.exponent")) == Catch::Approx(-1.0).margin(0.15));
    CHECK(std::stod(rep.at("decay.chi.exponent")) == Catch::Approx(-1.0).margin(0.15));
    CHECK(std::stod(rep.at("decay.u.exponent")) == Catch::Approx(-2.0).margin(0.15));
    CHECK(std::stod(rep.at("oracle.weighted_eta")) <= 1e-6);
}

TEST_CASE("verify flags a profile with one corrupted value") {
    const fs::path dir = fresh_dir("corrupt");
    const RunSpec spec =
        parse_config(write_config(dir, kFlowingConfig).string());
    REQUIRE(cmd_solve(spec, dir / "out", true) == 0);

    // perturb one density entry by a relative 1e-2 in the text file
    std::ifstream in(dir / "out" / "profile.txt");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    REQUIRE(lines.size() > 200);
    std::istringstream row(lines[200]);
    double col[8];
    for (double& c : col) row >> c;
    col[4] *= 1.0 + 1e-2;
    char buf[400];
    std::snprintf(buf, sizeof buf,
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g", col[0],
                  col[1], col[2], col[3], col[4], col[5], col[6], col[7]);
    lines[200] = buf;
    std::ofstream outf(dir / "out" / "bad.txt");
    for (const std::string& l : lines) outf << l << "\n";
    outf.close();

    CHECK(cmd_verify(spec, (dir / "out" / "bad.txt").string(), dir / "bad",
                     true) == 3);
    const auto rep = read_report((dir / "bad" / "report.txt").string());
    CHECK(rep.at("verify.result") == "FAIL");
}

TEST_CASE("sweep writes a sorted table and honors the exit-code contract") {
    const fs::path dir = fresh_dir("sweep");
    const RunSpec spec = parse_config(
        write_config(dir, kFlowingConfig +
                              "sweep.axis = u_minus\n"
                              "sweep.values = 1e-3 1e-2 1e-4\n")
            .string());
    REQUIRE(cmd_sweep(spec, dir / "out", true) == 0);

    std::ifstream tab(dir / "out" / "sweep.txt");
    std::string header;
    std::getline(tab, header);
    CHECK_THAT(header, Catch::Matchers::StartsWith("value converged"));
    std::vector<double> values;
    std::string line;
    while (std::getline(tab, line)) {
        std::istringstream row(line);
        double v = 0.0;
        row >> v;
        values.push_back(v);
    }
    REQUIRE(values.size() == 3);
    CHECK(std::is_sorted(values.begin(), values.end()));
    const auto man = read_report((dir / "out" / "manifest.txt").string());
    CHECK(man.at("sweep.failed") == "0");

    // a config without sweep settings is an input error
    const RunSpec bare = parse_config(write_config(fresh_dir("sweep_bare"),
                                                   kFlowingConfig)
                                          .string());
    CHECK_THROWS_AS(cmd_sweep(bare, dir / "none", true), ConfigError);
}

TEST_CASE("compare agrees across the two solvers") {
    const fs::path dir = fresh_dir("compare");
    const RunSpec spec =
        parse_config(write_config(dir, kFlowingConfig).string());
    REQUIRE(cmd_compare(spec, dir / "out", true) == 0);
    const auto rep = read_report((dir / "out" / "compare.txt").string());
    CHECK(std::stod(rep.at("compare.weighted_eta")) <= 1e-6);
    CHECK(std::stod(rep.at("compare.weighted_chi")) <= 1e-6);
}

TEST_CASE("command line contract: flags, verbs and input errors") {
    const fs::path dir = fresh_dir("cli");
    const fs::path cfg = write_config(dir, kImpermeableConfig);
    const std::string out = (dir / "out").string();

    auto run = [&](std::vector<const char*> args) {
        args.insert(args.begin(), "exflow");
        return run_cli(static_cast<int>(args.size()), args.data());
    };
    CHECK(run({}) == 1);                                     // no verb
    CHECK(run({"solve"}) == 1);                              // --config required
    CHECK(run({"orbit", "--config", cfg.c_str()}) == 1);     // unknown verb
    CHECK(run({"solve", "--config", cfg.c_str(), "--frob"}) == 1);
    CHECK(run({"solve", "--config", "/nonexistent.cfg"}) == 1);
    CHECK(run({"solve", "--config", cfg.c_str(), "--out"}) == 1);

    CHECK(run({"solve", "--config", cfg.c_str(), "--out", out.c_str(),
               "--quiet"}) == 0);
    CHECK(run({"verify", "--config", cfg.c_str(), "--out", out.c_str(),
               "--quiet"}) == 0);

    // sweep with an empty axis is an input error through the CLI as well
    const fs::path sweep_cfg =
        write_config(fresh_dir("cli_sweep"), kFlowingConfig + "sweep.axis = u_minus\n");
    CHECK(run({"sweep", "--config", sweep_cfg.c_str(), "--out", out.c_str(),
               "--quiet"}) == 1);
}
