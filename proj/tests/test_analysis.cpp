#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "exflow/analysis.hpp"

using namespace exflow;

namespace {
Parameters reference_params(double u_minus, double eta_minus, double chi_minus,
                            int n = 3) {
    ParameterConfig c;
    c.n = n;
    c.nu = 0.5;
    c.lambda = 0.0;
    c.kappa = 1.0;
    c.R_gas = 1.0;
    c.c_V = 1.5;
    c.v_plus = 1.0;
    c.theta_plus = 1.0;
    c.u_minus = u_minus;
    c.eta_minus = eta_minus;
    c.chi_minus = chi_minus;
    return build_parameters(c);
}

GridPtr solver_grid(const Parameters& p, const DerivedConstants& d,
                    std::size_t count = 2048, double r_max = 200.0) {
    double w = 0.05;
    if (d.epsilon_inflow)
        w = d.mu * *d.epsilon_inflow / (p.n * d.omega);
    else if (p.u_minus != 0.0)
        w = d.mu * std::abs(p.u_minus) / (p.v_plus * p.n * d.omega);
    return make_grid(p, d, r_max, count, w);
}

StationarySolution solve_ref(const Parameters& p, const DerivedConstants& d,
                             const GridPtr& g) {
    IterationControl ctl;
    const StationarySolution sol = solve_stationary(p, d, g, ctl);
    REQUIRE(sol.converged);
    return sol;
}
} // namespace

TEST_CASE("decay fit recovers exact power laws") {
    const Parameters p = reference_params(1e-3, 1e-3, 1e-3);
    const DerivedConstants d = derive_constants(p);
    const auto g = solver_grid(p, d, 1024);

    SampledField f(g);
    for (std::size_t i = 0; i < g->size(); ++i)
        f[i] = 3.0 * std::pow((*g)[i], -2.0);
    const DecayFit fit = fit_decay_exponent(f, 50.0, 150.0);
    CHECK(fit.exponent == Catch::Approx(-2.0).margin(1e-12));
    CHECK(fit.amplitude == Catch::Approx(3.0).epsilon(1e-10));
    CHECK(fit.r_squared == Catch::Approx(1.0).margin(1e-12));
    CHECK(fit.node_count >= 10);
    CHECK(fit.window_lo == 50.0);

    // negative-valued power law works the same way
    for (double& v : f.values) v = -v;
    CHECK(fit_decay_exponent(f, 50.0, 150.0).exponent ==
          Catch::Approx(-2.0).margin(1e-12));
}

TEST_CASE("decay fit rejections") {
    const Parameters p = reference_params(1e-3, 1e-3, 1e-3);
    const DerivedConstants d = derive_constants(p);
    const auto g = solver_grid(p, d, 256);

    SampledField f(g);
    for (std::size_t i = 0; i < g->size(); ++i)
        f[i] = std::sin((*g)[i]);
    CHECK_THROWS_WITH(fit_decay_exponent(f, 50.0, 150.0),
                      "oscillatory field, no power fit");

    for (std::size_t i = 0; i < g->size(); ++i)
        f[i] = std::pow((*g)[i], -1.0);
    CHECK_THROWS_AS(fit_decay_exponent(f, 199.0, 200.0), std::domain_error);
    CHECK_THROWS_AS(fit_decay_exponent(f, 50.0, 500.0), std::domain_error);
    CHECK_THROWS_AS(fit_decay_exponent(f, 0.5, 150.0), std::domain_error);
}

TEST_CASE("residuals of the solid-wall closed form") {
    ParameterConfig c;
    c.n = 3;
    c.nu = 0.5;
    c.lambda = 0.0;
    c.kappa = 1.0;
    c.R_gas = 1.0;
    c.c_V = 1.5;
    c.v_plus = 1.0;
    c.theta_plus = 1.0;
    c.u_minus = 0.0;
    c.theta_minus = 1.2;
    const Parameters p = build_parameters(c);
    const DerivedConstants d = derive_constants(p);
    const auto g = make_grid(p, d, 200.0, 4096, 0.0);

    const PhysicalProfile prof = impermeable_solution(p, g);
    const ResidualReport rep = residual_report(prof, p);
    CHECK(rep.mass.sup == 0.0);
    CHECK(rep.momentum.sup <= 1e-9);
    CHECK(rep.energy.sup <= 1e-3); // O(h^2) on the coarse far-field spacing
    CHECK(rep.plausible_solution);
}

TEST_CASE("residuals shrink under grid refinement and flag non-solutions") {
    const Parameters p = reference_params(1e-3, 1e-3, 1e-3);
    const DerivedConstants d = derive_constants(p);

    double prev_mom = 0.0, prev_ene = 0.0;
    for (std::size_t count : {1024u, 2048u}) {
        const auto g = solver_grid(p, d, count);
        const StationarySolution sol = solve_ref(p, d, g);
        const PhysicalProfile prof = reconstruct_physical(sol, p);
        const ResidualReport rep = residual_report(prof, p);
        INFO("N = " << count);
        CHECK(rep.plausible_solution);
        CHECK(rep.mass.sup <= 1e-6 * rep.mass.scale);
        if (prev_mom > 0.0) {
            CHECK(prev_mom / rep.momentum.rms >= 3.5);
            CHECK(prev_ene / rep.energy.rms >= 3.5);
        }
        prev_mom = rep.momentum.rms;
        prev_ene = rep.energy.rms;
    }

    // a profile that solves nothing produces O(1) relative residuals
    const auto g = solver_grid(p, d, 1024);
    PhysicalProfile junk;
    junk.rho = SampledField(g);
    junk.u = SampledField(g);
    junk.theta = SampledField(g);
    junk.pressure = SampledField(g);
    junk.eta = SampledField(g);
    junk.chi = SampledField(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double r = (*g)[i];
        junk.rho[i] = 1.0 + 0.3 * std::sin(r);
        junk.u[i] = 0.1 / r;
        junk.theta[i] = 1.0 + 0.2 * std::cos(r);
        junk.pressure[i] = junk.rho[i] * junk.theta[i];
        junk.eta[i] = 1.0 / junk.rho[i] - p.v_plus;
        junk.chi[i] = junk.theta[i] - p.theta_plus;
    }
    junk.mass_flux = 0.1;
    CHECK_FALSE(residual_report(junk, p).plausible_solution);
}

TEST_CASE("kernel bound holds under the flux-smallness hypothesis") {
    const Parameters p = reference_params(1e-3, 1e-3, 1e-3);
    const DerivedConstants d = derive_constants(p);
    const auto g = solver_grid(p, d, 2048);

    const KernelLemmaReport rep = check_kernel_lemma(p, d, g);
    CHECK(rep.hypothesis_satisfied);
    CHECK(rep.pointwise.holds);
    CHECK(rep.pointwise.worst_margin <= 1.0 + 1e-12);
    CHECK(rep.c0 > 0.0);
}

TEST_CASE("kernel bound check fails far outside the hypothesis") {
    // hypothesis bound is eps <= n omega / ((n-2) mu) = 1 here; take 10x
    const Parameters p = reference_params(10.0, 0.0, 1e-3);
    const DerivedConstants d = derive_constants(p);
    const auto g = make_grid(p, d, 200.0, 2048, 10.0);

    const KernelLemmaReport rep = check_kernel_lemma(p, d, g);
    CHECK_FALSE(rep.hypothesis_satisfied);
    CHECK_FALSE(rep.pointwise.holds);
    CHECK(rep.pointwise.worst_margin > 1.0);
}

TEST_CASE("kernel integral constant is stable across flux and viscosity") {
    double lo = 1e300, hi = 0.0;
    for (double mu : {0.1, 1.0}) {
        for (double eps : {1e-4, 1e-3, 1e-2}) {
            ParameterConfig c;
            c.n = 3;
            c.nu = mu / 2.0;
            c.lambda = 0.0;
            c.kappa = 1.0;
            c.R_gas = 1.0;
            c.c_V = 1.5;
            c.v_plus = 1.0;
            c.theta_plus = 1.0;
            c.u_minus = eps;
            c.eta_minus = 0.0;
            c.chi_minus = 1e-3;
            const Parameters p = build_parameters(c);
            const DerivedConstants d = derive_constants(p);
            const auto g = solver_grid(p, d, 2048);
            const KernelLemmaReport rep = check_kernel_lemma(p, d, g);
            CHECK(rep.pointwise.holds);
            lo = std::min(lo, rep.c0);
            hi = std::max(hi, rep.c0);
        }
    }
    CHECK(hi / lo < 2.0);
}

TEST_CASE("empirical solution constant responds linearly to the data") {
    double c_full = 0.0;
    for (double scale : {1.0, 0.5}) {
        const Parameters p =
            reference_params(1e-3 * scale, 1e-3 * scale, 1e-3 * scale);
        const DerivedConstants d = derive_constants(p);
        const auto g = solver_grid(p, d);
        const StationarySolution sol = solve_ref(p, d, g);
        const PhysicalProfile prof = reconstruct_physical(sol, p);
        const TheoremBoundReport rep = check_theorem_bounds(sol, prof, p);
        CHECK(rep.velocity_applicable);
        CHECK(rep.velocity_band_positive);
        CHECK(rep.velocity_band_inf > 0.0);
        CHECK(rep.velocity_band_sup >= rep.velocity_band_inf);
        if (scale == 1.0) c_full = rep.empirical_C;
        else
            CHECK(std::abs(rep.empirical_C - c_full) < 0.2 * c_full);
    }
}

TEST_CASE("solid-wall temperature constant is exactly one") {
    ParameterConfig c;
    c.n = 4;
    c.nu = 0.5;
    c.lambda = 0.0;
    c.kappa = 1.0;
    c.R_gas = 1.0;
    c.c_V = 1.5;
    c.v_plus = 1.0;
    c.theta_plus = 1.0;
    c.u_minus = 0.0;
    c.chi_minus = 0.2;
    const Parameters p = build_parameters(c);
    const DerivedConstants d = derive_constants(p);
    const auto g = make_grid(p, d, 200.0, 1024, 0.0);

    const PhysicalProfile prof = impermeable_solution(p, g);
    const TheoremBoundReport rep = check_theorem_bounds(prof, p);
    CHECK(rep.empirical_C == Catch::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(rep.velocity_applicable);
}

TEST_CASE("boundary-velocity sweep sharpens the density layer") {
    const Parameters base = reference_params(1e-2, 0.05, 0.1);
    SweepOptions opt;
    opt.nodes = 1024;
    opt.r_max = 100.0;

    const SweepTable t =
        sweep("u_minus", {1e-3, 1e-2, 1e-4}, base, opt);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.failed == 0);
    CHECK(t.axis == "u_minus");
    // rows come back sorted by axis value regardless of input order
    CHECK(t.rows[0].axis_value == 1e-4);
    CHECK(t.rows[2].axis_value == 1e-2);

    const double pinned = std::abs(1.0 / base.v_minus() -
                                   1.0 / base.theta_minus());
    for (const SweepRow& row : t.rows) {
        CHECK(row.converged);
        CHECK(row.layer_amplitude == Catch::Approx(pinned).epsilon(1e-6));
        CHECK(row.exp_eta == Catch::Approx(-1.0).margin(0.15));
        CHECK(row.exp_chi == Catch::Approx(-1.0).margin(0.15));
        CHECK(row.exp_u == Catch::Approx(-2.0).margin(0.15));
    }
    // interior density approaches the zero-flux limit as the flux shrinks
    CHECK(t.rows[0].interior_gap < t.rows[1].interior_gap);
    CHECK(t.rows[1].interior_gap < t.rows[2].interior_gap);
}

TEST_CASE("viscosity sweep keeps the empirical constant bounded") {
    const Parameters base = reference_params(1e-3, 1e-3, 1e-3);
    SweepOptions opt;
    opt.nodes = 1024;
    opt.r_max = 100.0;

    const SweepTable t = sweep("mu", {1.0, 0.25}, base, opt);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.failed == 0);
    const double a = t.rows[0].empirical_C, b = t.rows[1].empirical_C;
    CHECK(std::max(a, b) / std::min(a, b) < 2.0);
}

TEST_CASE("sweep records per-row failures and rejects bad axes") {
    const Parameters base = reference_params(1e-3, 1e-3, 1e-3);
    SweepOptions opt;
    opt.nodes = 256;
    opt.r_max = 50.0;

    // u_- = 0 is the solid-wall regime: that row fails, the sweep survives
    const SweepTable t = sweep("u_minus", {1e-3, 0.0}, base, opt);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.failed == 1);
    CHECK_FALSE(t.rows[0].converged);
    CHECK_FALSE(t.rows[0].diagnostic.empty());
    CHECK(t.rows[1].converged);

    CHECK_THROWS_AS(sweep("u_minus", {}, base, opt), ValidationError);
    CHECK_THROWS_AS(sweep("zeta_minus", {1.0}, base, opt), ValidationError);
    CHECK_THROWS_AS(sweep("mu", {-1.0, 1.0}, base, opt), ValidationError);
}
