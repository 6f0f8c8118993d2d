#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "exflow/analysis.hpp"
#include "exflow/bvp.hpp"
#include "exflow/fixed_point.hpp"

namespace exflow {

/// Raised on malformed configuration text; carries the line number.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")") {}
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GridSpec {
    double r_max = 200.0;
    std::size_t nodes = 4096;
};

struct ControlSpec {
    double tol = 1e-10;
    int max_iter = 200;
};

/// One fully resolved run: validated parameters plus grid, iteration and
/// command-specific settings, with documented defaults applied.
struct RunSpec {
    Parameters params;
    GridSpec grid;
    ControlSpec control;
    std::string sweep_axis;
    std::vector<double> sweep_values;
    double fit_lo = 0.0, fit_hi = 0.0; // 0: default window [R_max/4, 3R_max/4]
};

namespace detail {

inline double parse_number(const std::string& s, const std::string& key, int line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("field " + key + ": not a number: '" + s + "'", line);
    return v;
}

} // namespace detail

/// Parses a flat key-value config with dotted nesting, e.g.
///   parameters.n = 3
///   grid.r_max = 200
///   sweep.values = 1e-2 1e-3
/// '#' starts a comment. Unknown keys and malformed numbers are reported
/// with their line; missing/invalid physics fields are reported by
/// build_parameters with the field name.
inline RunSpec parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);

    ParameterConfig pc;
    RunSpec spec;
    std::map<std::string, std::optional<double>*> scalar = {
        {"parameters.n", &pc.n},
        {"parameters.R_gas", &pc.R_gas},
        {"parameters.c_V", &pc.c_V},
        {"parameters.nu", &pc.nu},
        {"parameters.lambda", &pc.lambda},
        {"parameters.kappa", &pc.kappa},
        {"parameters.v_plus", &pc.v_plus},
        {"parameters.theta_plus", &pc.theta_plus},
        {"parameters.u_minus", &pc.u_minus},
        {"parameters.u_plus", &pc.u_plus},
        {"parameters.eta_minus", &pc.eta_minus},
        {"parameters.chi_minus", &pc.chi_minus},
        {"parameters.rho_minus", &pc.rho_minus},
        {"parameters.theta_minus", &pc.theta_minus},
        {"parameters.r0", &pc.r0},
    };

    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string key;
        if (!(ls >> key)) continue;
        std::string eq;
        ls >> eq;
        if (eq != "=")
            throw ConfigError("expected 'key = value', got '" + raw + "'", lineno);

        if (auto it = scalar.find(key); it != scalar.end()) {
            std::string val;
            if (!(ls >> val)) throw ConfigError("field " + key + ": missing value", lineno);
            *it->second = detail::parse_number(val, key, lineno);
        } else if (key == "grid.r_max" || key == "grid.N" || key == "control.tol" ||
                   key == "control.max_iter" || key == "fit.window_lo" ||
                   key == "fit.window_hi") {
            std::string val;
            if (!(ls >> val)) throw ConfigError("field " + key + ": missing value", lineno);
            const double v = detail::parse_number(val, key, lineno);
            if (key == "grid.r_max") spec.grid.r_max = v;
            else if (key == "grid.N") {
                if (v != std::floor(v) || v < 1.0)
                    throw ConfigError("field grid.N: must be a positive integer", lineno);
                spec.grid.nodes = static_cast<std::size_t>(v);
            } else if (key == "control.tol") spec.control.tol = v;
            else if (key == "control.max_iter") {
                if (v != std::floor(v) || v < 1.0)
                    throw ConfigError("field control.max_iter: must be a positive integer",
                                      lineno);
                spec.control.max_iter = static_cast<int>(v);
            } else if (key == "fit.window_lo") spec.fit_lo = v;
            else spec.fit_hi = v;
        } else if (key == "sweep.axis") {
            if (!(ls >> spec.sweep_axis))
                throw ConfigError("field sweep.axis: missing value", lineno);
        } else if (key == "sweep.values") {
            std::string val;
            while (ls >> val)
                spec.sweep_values.push_back(detail::parse_number(val, key, lineno));
        } else {
            throw ConfigError("unknown field: " + key, lineno);
        }
        std::string extra;
        if (key != "sweep.values" && (ls >> extra))
            throw ConfigError("field " + key + ": trailing text '" + extra + "'", lineno);
    }

    spec.params = build_parameters(pc); // ValidationError names the field
    if (spec.grid.nodes > 10000000)
        throw ConfigError("grid.N exceeds 1e7");
    if (spec.control.tol < 1e-14)
        throw ConfigError("control.tol below 1e-14");
    return spec;
}

inline GridPtr spec_grid(const RunSpec& spec, const DerivedConstants& d) {
    const Parameters& p = spec.params;
    double eps_scale = 0.0;
    if (d.epsilon_inflow) eps_scale = *d.epsilon_inflow;
    else if (p.u_minus != 0.0) eps_scale = std::abs(p.u_minus) / p.v_plus;
    return make_grid(p, d, spec.grid.r_max, spec.grid.nodes, eps_scale);
}

// ---------------------------------------------------------------------------
// serialization

/// 64-bit FNV-1a over a file's bytes; good enough to pin artifacts in the
/// manifest and to test run-to-run determinism.
inline std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for checksum: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

inline constexpr const char* kProfileHeader = "r eta chi zeta rho u theta p";

inline void write_profile(const PhysicalProfile& prof, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write profile: " + path);
    std::fprintf(f, "%s\n", kProfileHeader);
    const RadialGrid& g = *prof.rho.grid;
    for (std::size_t i = 0; i < g.size(); ++i)
        std::fprintf(f, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                     g[i], prof.eta[i], prof.chi[i], prof.zeta[i], prof.rho[i],
                     prof.u[i], prof.theta[i], prof.pressure[i]);
    std::fclose(f);
}

/// Reads a profile written by write_profile onto the given grid. The radius
/// column must reproduce the grid nodes bit-exactly (both sides round-trip
/// through 17 significant digits).
inline PhysicalProfile read_profile(const std::string& path, const GridPtr& g,
                                    const Parameters& p) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile: " + path);
    std::string header;
    std::getline(in, header);
    if (header != kProfileHeader)
        throw std::runtime_error("bad profile header in " + path);

    PhysicalProfile prof;
    prof.rho = SampledField(g);
    prof.u = SampledField(g);
    prof.theta = SampledField(g);
    prof.pressure = SampledField(g);
    prof.eta = SampledField(g);
    prof.chi = SampledField(g);
    prof.zeta = SampledField(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
        double r = 0.0;
        if (!(in >> r >> prof.eta[i] >> prof.chi[i] >> prof.zeta[i] >>
              prof.rho[i] >> prof.u[i] >> prof.theta[i] >> prof.pressure[i]))
            throw std::runtime_error("short profile: " + path);
        if (r != (*g)[i])
            throw std::runtime_error("profile does not match spec grid at row " +
                                     std::to_string(i));
    }
    // the flux constant eps = r^{n-1} u / v is not stored; recover it at the
    // wall node (r = 1) and let the consistency check validate it elsewhere
    prof.mass_flux = prof.u[0] / (p.v_plus + prof.eta[0]);
    prof.eta.set_tail(static_cast<double>(p.n - 2));
    prof.chi.set_tail(static_cast<double>(p.n - 2));
    prof.zeta.set_tail(static_cast<double>(p.n - 1));
    prof.u.set_tail(static_cast<double>(p.n - 1));
    prof.rho.set_tail(0.0);
    prof.theta.set_tail(0.0);
    prof.pressure.set_tail(0.0);
    return prof;
}

/// Flat key-value report, one "key value" pair per line, keys sorted.
inline void write_report(const std::map<std::string, std::string>& kv,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    for (const auto& [k, v] : kv) out << k << " " << v << "\n";
}

inline std::map<std::string, std::string> read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    std::map<std::string, std::string> kv;
    std::string k, v;
    while (in >> k >> v) kv[k] = v;
    return kv;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void echo_spec(std::map<std::string, std::string>& kv, const RunSpec& s) {
    const Parameters& p = s.params;
    kv["spec.n"] = std::to_string(p.n);
    kv["spec.R_gas"] = fmt(p.R_gas);
    kv["spec.c_V"] = fmt(p.c_V);
    kv["spec.nu"] = fmt(p.nu);
    kv["spec.lambda"] = fmt(p.lambda);
    kv["spec.kappa"] = fmt(p.kappa);
    kv["spec.v_plus"] = fmt(p.v_plus);
    kv["spec.theta_plus"] = fmt(p.theta_plus);
    kv["spec.u_minus"] = fmt(p.u_minus);
    kv["spec.eta_minus"] = fmt(p.eta_minus);
    kv["spec.chi_minus"] = fmt(p.chi_minus);
    kv["spec.regime"] = to_string(classify_regime(p));
    kv["spec.grid.r_max"] = fmt(s.grid.r_max);
    kv["spec.grid.N"] = std::to_string(s.grid.nodes);
    kv["spec.control.tol"] = fmt(s.control.tol);
    kv["spec.control.max_iter"] = std::to_string(s.control.max_iter);
}

class PhaseTimer {
public:
    explicit PhaseTimer(std::map<std::string, std::string>& kv) : kv_(kv) {}
    template <class F> auto time(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            record(name, t0);
        } else {
            auto r = f();
            record(name, t0);
            return r;
        }
    }

private:
    void record(const std::string& name, std::chrono::steady_clock::time_point t0) {
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        kv_["timing." + name + ".seconds"] = fmt(s);
    }
    std::map<std::string, std::string>& kv_;
};

inline void add_artifact(std::map<std::string, std::string>& kv,
                         const std::filesystem::path& file) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(file_checksum(file.string())));
    kv["artifact." + file.filename().string() + ".fnv1a"] = buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// commands
//
// Exit codes: 0 success, 1 input error, 2 non-convergence, 3 failed hard
// verification check. Input errors are reported before any artifact is
// written; a non-converged solve still writes its artifacts.

inline int cmd_solve(const RunSpec& spec, const std::filesystem::path& out,
                     bool quiet) {
    namespace fs = std::filesystem;
    fs::create_directories(out);
    const Parameters& p = spec.params;
    const DerivedConstants d = derive_constants(p);

    std::map<std::string, std::string> manifest;
    manifest["artifact.version"] = "1";
    detail::echo_spec(manifest, spec);
    detail::PhaseTimer timer(manifest);

    const GridPtr g = timer.time("grid", [&] { return spec_grid(spec, d); });

    PhysicalProfile prof;
    bool converged = true;
    std::ofstream log(out / "convergence.txt");
    if (classify_regime(p) == FlowRegime::Impermeable) {
        prof = timer.time("solve", [&] { return impermeable_solution(p, g); });
        log << "closed-form\n";
        manifest["solve.converged"] = "1";
        manifest["solve.method"] = "closed-form";
    } else {
        IterationControl ctl;
        ctl.tol = spec.control.tol;
        ctl.max_iter = spec.control.max_iter;
        StationarySolution sol;
        try {
            sol = timer.time("solve", [&] { return solve_stationary(p, d, g, ctl); });
        } catch (const AdmissibilityError& e) {
            // a diverging iteration is a non-convergence outcome, not bad input
            log << "# " << e.what() << "\n";
            manifest["solve.converged"] = "0";
            manifest["solve.diagnostic"] = e.what();
            write_report(manifest, (out / "manifest.txt").string());
            if (!quiet) std::fprintf(stderr, "solve: diverged: %s\n", e.what());
            return 2;
        }
        converged = sol.converged;
        log << "# iteration increment ratio\n";
        for (std::size_t i = 0; i < sol.state.increment_norms.size(); ++i) {
            log << (i + 1) << " " << fmt(sol.state.increment_norms[i]) << " ";
            log << (i >= 1 ? fmt(sol.contraction_ratios[i - 1]) : "-") << "\n";
        }
        if (!sol.diagnostic.empty()) log << "# " << sol.diagnostic << "\n";
        prof = reconstruct_physical(sol, p);
        manifest["solve.converged"] = converged ? "1" : "0";
        manifest["solve.method"] = "fixed-point";
        manifest["solve.iterations"] = std::to_string(sol.iterations);
        manifest["solve.final_increment"] = fmt(sol.final_increment);
        manifest["solve.alpha"] = fmt(sol.state.alpha);
        manifest["solve.epsilon"] = fmt(sol.state.epsilon);
        manifest["solve.outside_smallness"] = sol.outside_smallness ? "1" : "0";
        if (!sol.diagnostic.empty()) manifest["solve.diagnostic"] = sol.diagnostic;
    }
    log.close();
    manifest["solve.mass_flux"] = fmt(prof.mass_flux);

    timer.time("write", [&] { write_profile(prof, (out / "profile.txt").string()); });
    detail::add_artifact(manifest, out / "profile.txt");
    detail::add_artifact(manifest, out / "convergence.txt");
    write_report(manifest, (out / "manifest.txt").string());

    if (!quiet)
        std::fprintf(stderr, "solve: %s, profile %s\n",
                     converged ? "converged" : "NOT converged",
                     (out / "profile.txt").c_str());
    return converged ? 0 : 2;
}

namespace detail {

// profile columns are redundant; any single corrupted value breaks either
// an algebraic identity here or the equation residuals downstream
inline bool profile_consistent(const PhysicalProfile& prof, const Parameters& p) {
    const RadialGrid& g = *prof.rho.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = p.v_plus + prof.eta[i];
        const double th = p.theta_plus + prof.chi[i];
        if (!(v > 0.0) || !(th > 0.0)) return false;
        if (std::abs(prof.rho[i] - 1.0 / v) > 1e-12 * std::abs(prof.rho[i]))
            return false;
        if (std::abs(prof.theta[i] - th) > 1e-12 * th) return false;
        const double pr = p.R_gas * prof.rho[i] * prof.theta[i];
        if (std::abs(prof.pressure[i] - pr) > 1e-12 * pr) return false;
        const double u = prof.mass_flux * v / std::pow(g[i], p.n - 1);
        const double u_scale = std::abs(prof.mass_flux) * v + 1e-300;
        if (std::abs(prof.u[i] - u) > 1e-12 * u_scale) return false;
    }
    return true;
}

} // namespace detail

inline int cmd_verify(const RunSpec& spec, const std::string& profile_path,
                      const std::filesystem::path& out, bool quiet) {
    namespace fs = std::filesystem;
    fs::create_directories(out);
    const Parameters& p = spec.params;
    const DerivedConstants d = derive_constants(p);
    const GridPtr g = spec_grid(spec, d);
    const PhysicalProfile prof = read_profile(profile_path, g, p);

    std::map<std::string, std::string> rep;
    detail::echo_spec(rep, spec);
    detail::PhaseTimer timer(rep);
    const bool impermeable = classify_regime(p) == FlowRegime::Impermeable;

    bool hard_ok = true;
    auto hard = [&](const std::string& key, bool ok) {
        rep["check." + key] = ok ? "pass" : "FAIL";
        hard_ok = hard_ok && ok;
    };

    // hard check 1: the profile solves the original equations
    const bool consistent = detail::profile_consistent(prof, p);
    rep["profile.consistent"] = consistent ? "true" : "false";
    const ResidualReport res =
        timer.time("residual", [&] { return residual_report(prof, p); });
    rep["residual.mass.sup"] = fmt(res.mass.sup);
    rep["residual.mass.rms"] = fmt(res.mass.rms);
    rep["residual.momentum.sup"] = fmt(res.momentum.sup);
    rep["residual.momentum.rms"] = fmt(res.momentum.rms);
    rep["residual.energy.sup"] = fmt(res.energy.sup);
    rep["residual.energy.rms"] = fmt(res.energy.rms);
    hard("residual", consistent && res.plausible_solution);

    // decay fits (reported, not hard: the rates are asymptotic statements)
    double lo = spec.fit_lo, hi = spec.fit_hi;
    if (lo == 0.0 || hi == 0.0)
        std::tie(lo, hi) = default_fit_window(spec.grid.r_max);
    auto fit_into = [&](const SampledField& f, const std::string& name) {
        try {
            const DecayFit fit = fit_decay_exponent(f, lo, hi);
            rep["decay." + name + ".exponent"] = fmt(fit.exponent);
            rep["decay." + name + ".r_squared"] = fmt(fit.r_squared);
            rep["decay." + name + ".amplitude"] = fmt(fit.amplitude);
            rep["decay." + name + ".window_lo"] = fmt(fit.window_lo);
            rep["decay." + name + ".window_hi"] = fmt(fit.window_hi);
        } catch (const std::domain_error& e) {
            rep["decay." + name + ".error"] = e.what();
        }
    };
    timer.time("decay", [&] {
        fit_into(prof.eta, "eta");
        fit_into(prof.chi, "chi");
        fit_into(prof.u, "u");
    });

    // hard check 2: kernel lemma, only under its own hypothesis
    if (!impermeable) {
        const KernelLemmaReport kl =
            timer.time("lemma", [&] { return check_kernel_lemma(p, d, g); });
        rep["bounds.lemma31.hypothesis"] = kl.hypothesis_satisfied ? "true" : "false";
        rep["bounds.lemma31.holds"] = kl.pointwise.holds ? "true" : "false";
        rep["bounds.lemma31.margin"] = fmt(kl.pointwise.worst_margin);
        rep["bounds.lemma31.c0"] = fmt(kl.c0);
        if (kl.hypothesis_satisfied) hard("lemma31", kl.pointwise.holds);
        else rep["check.lemma31"] = "skipped";
    } else {
        rep["check.lemma31"] = "not-applicable";
    }

    // theorem constants (reported)
    if (impermeable) {
        const TheoremBoundReport tb = check_theorem_bounds(prof, p);
        rep["bounds.theorem.C"] = fmt(tb.empirical_C);
    }

    // hard check 3: independent-solver agreement
    if (!impermeable) {
        IterationControl ctl;
        ctl.tol = spec.control.tol;
        ctl.max_iter = spec.control.max_iter;
        const StationarySolution fp =
            timer.time("fixed_point", [&] { return solve_stationary(p, d, g, ctl); });
        if (fp.converged) {
            const TheoremBoundReport tb =
                check_theorem_bounds(fp, reconstruct_physical(fp, p), p);
            rep["bounds.theorem.C"] = fmt(tb.empirical_C);
            rep["bounds.velocity.inf"] = fmt(tb.velocity_band_inf);
            rep["bounds.velocity.sup"] = fmt(tb.velocity_band_sup);
        }
        const StationarySolution bvp = timer.time("oracle", [&] {
            return solve_bvp(p, d, g, fp.converged ? &fp : nullptr);
        });
        if (fp.converged && bvp.converged) {
            const ComparisonReport cmp =
                compare_solutions(fp, bvp, static_cast<double>(p.n - 2));
            rep["oracle.weighted_eta"] = fmt(cmp.weighted_eta);
            rep["oracle.weighted_chi"] = fmt(cmp.weighted_chi);
            const double da = std::abs(fp.state.alpha - bvp.state.alpha);
            rep["oracle.alpha_rel"] =
                fmt(da / std::max(std::abs(fp.state.alpha), 1e-300));
            hard("oracle", cmp.weighted_eta <= 1e-6 && cmp.weighted_chi <= 1e-6 &&
                               da <= 1e-8 * std::abs(fp.state.alpha));
        } else {
            rep["oracle.error"] = !fp.converged ? fp.diagnostic : bvp.diagnostic;
            hard("oracle", false);
        }
    } else {
        rep["check.oracle"] = "not-applicable"; // regime gate: no flow, no oracle
    }

    rep["verify.result"] = hard_ok ? "pass" : "FAIL";
    write_report(rep, (out / "report.txt").string());
    if (!quiet)
        std::fprintf(stderr, "verify: %s, report %s\n", hard_ok ? "pass" : "FAIL",
                     (out / "report.txt").c_str());
    return hard_ok ? 0 : 3;
}

inline int cmd_sweep(const RunSpec& spec, const std::filesystem::path& out,
                     bool quiet) {
    namespace fs = std::filesystem;
    if (spec.sweep_axis.empty() || spec.sweep_values.empty())
        throw ConfigError("sweep needs sweep.axis and a nonempty sweep.values");
    fs::create_directories(out);

    SweepOptions opt;
    opt.r_max = spec.grid.r_max;
    opt.nodes = spec.grid.nodes;
    opt.control.tol = spec.control.tol;
    opt.control.max_iter = spec.control.max_iter;
    const SweepTable t = sweep(spec.sweep_axis, spec.sweep_values, spec.params, opt);

    std::ofstream tab(out / "sweep.txt");
    tab << "value converged iterations norm_eta norm_chi C exp_eta exp_chi exp_u "
           "layer_amplitude interior_gap\n";
    std::map<std::string, std::string> manifest;
    manifest["artifact.version"] = "1";
    detail::echo_spec(manifest, spec);
    manifest["sweep.axis"] = t.axis;
    manifest["sweep.rows"] = std::to_string(t.rows.size());
    manifest["sweep.failed"] = std::to_string(t.failed);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const SweepRow& r = t.rows[i];
        tab << fmt(r.axis_value) << " " << (r.converged ? 1 : 0) << " "
            << r.iterations << " " << fmt(r.norm_eta) << " " << fmt(r.norm_chi)
            << " " << fmt(r.empirical_C) << " " << fmt(r.exp_eta) << " "
            << fmt(r.exp_chi) << " " << fmt(r.exp_u) << " "
            << fmt(r.layer_amplitude) << " " << fmt(r.interior_gap) << "\n";
        const std::string key = "sweep.row" + std::to_string(i);
        manifest[key + ".value"] = fmt(r.axis_value);
        manifest[key + ".converged"] = r.converged ? "1" : "0";
        if (!r.diagnostic.empty()) manifest[key + ".diagnostic"] = r.diagnostic;
    }
    tab.close();
    detail::add_artifact(manifest, out / "sweep.txt");
    write_report(manifest, (out / "manifest.txt").string());

    const bool any_ok = t.failed < t.rows.size();
    if (!quiet)
        std::fprintf(stderr, "sweep: %zu/%zu rows converged, table %s\n",
                     t.rows.size() - t.failed, t.rows.size(),
                     (out / "sweep.txt").c_str());
    return any_ok ? 0 : 2;
}

inline int cmd_compare(const RunSpec& spec, const std::filesystem::path& out,
                       bool quiet) {
    namespace fs = std::filesystem;
    fs::create_directories(out);
    const Parameters& p = spec.params;
    if (classify_regime(p) == FlowRegime::Impermeable)
        throw ConfigError("compare needs a flowing regime (u_minus != 0)");
    const DerivedConstants d = derive_constants(p);
    const GridPtr g = spec_grid(spec, d);

    std::map<std::string, std::string> rep;
    detail::echo_spec(rep, spec);
    detail::PhaseTimer timer(rep);
    IterationControl ctl;
    ctl.tol = spec.control.tol;
    ctl.max_iter = spec.control.max_iter;
    const StationarySolution fp =
        timer.time("fixed_point", [&] { return solve_stationary(p, d, g, ctl); });
    const StationarySolution bvp = timer.time("oracle", [&] {
        return solve_bvp(p, d, g, fp.converged ? &fp : nullptr);
    });
    rep["fixed_point.converged"] = fp.converged ? "1" : "0";
    rep["oracle.converged"] = bvp.converged ? "1" : "0";
    bool ok = fp.converged && bvp.converged;
    if (ok) {
        const ComparisonReport cmp =
            compare_solutions(fp, bvp, static_cast<double>(p.n - 2));
        rep["compare.weighted_eta"] = fmt(cmp.weighted_eta);
        rep["compare.weighted_chi"] = fmt(cmp.weighted_chi);
        rep["compare.sup_eta"] = fmt(cmp.sup_eta);
        rep["compare.sup_chi"] = fmt(cmp.sup_chi);
        rep["compare.worst_radius"] = fmt(cmp.worst_radius);
        rep["fixed_point.alpha"] = fmt(fp.state.alpha);
        rep["oracle.alpha"] = fmt(bvp.state.alpha);
    } else {
        rep["compare.error"] = !fp.converged ? fp.diagnostic : bvp.diagnostic;
    }
    write_report(rep, (out / "compare.txt").string());
    if (!quiet)
        std::fprintf(stderr, "compare: %s\n", ok ? "done" : "solver failure");
    return ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// argument parsing

inline int run_cli(int argc, const char* const* argv) {
    const std::string usage =
        "usage: exflow <solve|verify|sweep|compare> --config PATH [--out DIR] "
        "[--profile PATH] [--quiet]\n";
    if (argc < 2) {
        std::fprintf(stderr, "%s", usage.c_str());
        return 1;
    }
    const std::string verb = argv[1];
    std::string config, profile;
    std::filesystem::path out = ".";
    bool quiet = false;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        auto need = [&](const char* flag) -> std::string {
            if (i + 1 >= argc)
                throw ConfigError(std::string(flag) + " needs an argument");
            return argv[++i];
        };
        try {
            if (a == "--config") config = need("--config");
            else if (a == "--out") out = need("--out");
            else if (a == "--profile") profile = need("--profile");
            else if (a == "--quiet") quiet = true;
            else {
                std::fprintf(stderr, "unknown flag: %s\n%s", a.c_str(), usage.c_str());
                return 1;
            }
        } catch (const ConfigError& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        }
    }
    if (config.empty()) {
        std::fprintf(stderr, "error: --config PATH is required\n%s", usage.c_str());
        return 1;
    }

    try {
        const RunSpec spec = parse_config(config);
        if (verb == "solve") return cmd_solve(spec, out, quiet);
        if (verb == "verify") {
            if (profile.empty()) profile = (out / "profile.txt").string();
            return cmd_verify(spec, profile, out, quiet);
        }
        if (verb == "sweep") return cmd_sweep(spec, out, quiet);
        if (verb == "compare") return cmd_compare(spec, out, quiet);
        std::fprintf(stderr, "unknown command: %s\n%s", verb.c_str(), usage.c_str());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    }
}

} // namespace exflow
