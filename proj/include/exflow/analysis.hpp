#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "exflow/fixed_point.hpp"
#include "exflow/kernel.hpp"
#include "exflow/norms.hpp"
#include "exflow/quadrature.hpp"

namespace exflow {

/// Least-squares power-law fit of |f| over a radius window.
struct DecayFit {
    double exponent = 0.0;   // slope of log|f| against log r
    double r_squared = 0.0;
    double amplitude = 0.0;  // fitted prefactor, |f| ~ amplitude * r^exponent
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t node_count = 0;
};

inline DecayFit fit_decay_exponent(const SampledField& f, double r_lo, double r_hi) {
    const RadialGrid& g = *f.grid;
    if (!(r_lo >= 1.0) || !(r_hi <= g.r_max) || !(r_lo < r_hi))
        throw std::domain_error("fit window must lie inside [1, R_max]");

    std::vector<double> x, y;
    int sign = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = g[i];
        if (r < r_lo || r > r_hi) continue;
        const int s = f[i] > 0.0 ? 1 : (f[i] < 0.0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign))
            throw std::domain_error("oscillatory field, no power fit");
        sign = s;
        x.push_back(std::log(r));
        y.push_back(std::log(std::abs(f[i])));
    }
    if (x.size() < 10)
        throw std::domain_error("fit window holds fewer than 10 nodes");

    const double m = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (intercept + slope * x[i]);
        ss_res += e * e;
        ss_tot += (y[i] - my) * (y[i] - my);
    }

    DecayFit fit;
    fit.exponent = slope;
    fit.amplitude = std::exp(intercept);
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.window_lo = r_lo;
    fit.window_hi = r_hi;
    fit.node_count = x.size();
    return fit;
}

/// Default fit window, clear of the boundary layer and the truncated tail.
inline std::pair<double, double> default_fit_window(double r_max) {
    return {r_max / 4.0, 3.0 * r_max / 4.0};
}

struct EquationResidual {
    double sup = 0.0;
    double rms = 0.0;
    double scale = 0.0;  // magnitude of the largest equation term, for context
};

struct ResidualReport {
    EquationResidual mass, momentum, energy;
    bool plausible_solution = false;
};

namespace detail {

// d/dr on the (nonuniform) grid, second order; endpoints one-sided.
inline std::vector<double> grid_derivative(const RadialGrid& g,
                                           const std::vector<double>& y) {
    return fd_slopes(g.nodes, y);
}

} // namespace detail

/// Substitutes a physical profile into the stationary conservation laws of
/// mass, momentum and energy. Each equation is multiplied by r^{n-1} and
/// the residual of node i is the finite-difference flux imbalance over the
/// dual cell [r_{i-1/2}, r_{i+1/2}]: conservative terms become differences
/// of face averages, gradients become first differences at the faces. Only
/// first differences of the data appear, so the rounding floor stays flat
/// while the truncation error per cell is O(h^3). The mass residual of a
/// profile built from the deviation fields is at rounding level because
/// the flux r^{n-1} rho u is constant by construction.
inline ResidualReport residual_report(const PhysicalProfile& prof,
                                      const Parameters& p) {
    const RadialGrid& g = *prof.rho.grid;
    const std::size_t m = g.size();
    const int n = p.n;
    const double mu = p.mu();

    if (prof.eta.size() != m || prof.chi.size() != m)
        throw std::domain_error("residual_report needs the deviation fields");

    // The differenced quantities are deviations from their far-field
    // constants, assembled from eta, chi and u so that their rounding
    // floor is ulp(deviation), not ulp(state). Each line is an exact
    // algebraic rearrangement of the physical quantity, e.g.
    // r^{n-1} p u - eps R theta_+ = r^{n-1} u (p - p_+) + p_+ (r^{n-1} u - eps v_+).
    const double p_plus = p.R_gas * p.theta_plus / p.v_plus;
    const double eps_flux = prof.mass_flux;
    std::vector<double> rn1(m), flux(m), mom_flux(m), press(m), shear(m);
    std::vector<double> ene_flux(m), p_work(m), heat(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double r = g[i];
        rn1[i] = std::pow(r, n - 1);
        const double u = prof.u[i];
        const double eta = prof.eta[i], chi = prof.chi[i];
        const double v = p.v_plus + eta;
        flux[i] = rn1[i] * u / v;
        mom_flux[i] = flux[i] * u;
        press[i] = p.R_gas * (p.v_plus * chi - p.theta_plus * eta) /
                   (p.v_plus * v);
        shear[i] = rn1[i] * u - eps_flux * p.v_plus;
        ene_flux[i] = flux[i] * (p.c_V * chi + 0.5 * u * u) +
                      (flux[i] - eps_flux) * p.c_V * p.theta_plus;
        p_work[i] = rn1[i] * u * press[i] + p_plus * shear[i];
        heat[i] = chi;
    }
    const std::vector<double> d_u = detail::grid_derivative(g, prof.u.values);

    ResidualReport rep;
    double ssm = 0.0, ssp = 0.0, sse = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double r = g[i];
        const double u = prof.u[i];
        const double hl = r - g[i - 1], hr = g[i + 1] - r;
        const double face_l = std::pow(0.5 * (g[i - 1] + r), n - 1);
        const double face_r = std::pow(0.5 * (r + g[i + 1]), n - 1);
        const double vol = 0.5 * (hl + hr);

        const double res_mass = 0.5 * (flux[i + 1] - flux[i - 1]);

        const double div_l = (shear[i] - shear[i - 1]) / (hl * face_l);
        const double div_r = (shear[i + 1] - shear[i]) / (hr * face_r);
        const double t_adv = 0.5 * (mom_flux[i + 1] - mom_flux[i - 1]);
        const double t_pres = rn1[i] * 0.5 * (press[i + 1] - press[i - 1]);
        const double t_visc = mu * rn1[i] * (div_r - div_l);
        const double res_mom = t_adv + t_pres - t_visc;
        const double mom_scale = std::max({std::abs(t_adv), std::abs(t_pres),
                                           std::abs(t_visc)});

        const double div = d_u[i] + (n - 1) * u / r;
        const double psi = 2.0 * p.nu * d_u[i] * d_u[i] +
                           2.0 * p.nu * (n - 1) * (u / r) * (u / r) +
                           p.lambda * div * div;
        const double t_conv = 0.5 * (ene_flux[i + 1] - ene_flux[i - 1]);
        const double t_work = 0.5 * (p_work[i + 1] - p_work[i - 1]);
        const double q_l = face_l * (heat[i] - heat[i - 1]) / hl;
        const double q_r = face_r * (heat[i + 1] - heat[i]) / hr;
        const double t_heat = p.kappa * (q_r - q_l);
        const double t_sdis = mu * rn1[i] * u * (div_r - div_l);
        const double t_psi = rn1[i] * psi * vol;
        const double res_ene = t_conv + t_work - t_heat - t_sdis - t_psi;
        const double ene_scale = std::max({std::abs(t_conv), std::abs(t_work),
                                           std::abs(t_heat), std::abs(t_sdis),
                                           std::abs(t_psi)});

        rep.mass.sup = std::max(rep.mass.sup, std::abs(res_mass));
        rep.momentum.sup = std::max(rep.momentum.sup, std::abs(res_mom));
        rep.energy.sup = std::max(rep.energy.sup, std::abs(res_ene));
        rep.momentum.scale = std::max(rep.momentum.scale, mom_scale);
        rep.energy.scale = std::max(rep.energy.scale, ene_scale);
        ssm += res_mass * res_mass;
        ssp += res_mom * res_mom;
        sse += res_ene * res_ene;
        ++count;
    }
    rep.mass.scale = std::abs(eps_flux);
    const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
    rep.mass.rms = std::sqrt(ssm * inv);
    rep.momentum.rms = std::sqrt(ssp * inv);
    rep.energy.rms = std::sqrt(sse * inv);

    // A genuine solution sits far below its own term scale; an absolute
    // floor keeps degenerate cases (all terms near zero, e.g. a solid
    // wall with constant pressure) from tripping the relative test.
    const double floor_ = 1e-8 * p.R_gas * p.theta_plus / p.v_plus;
    auto ok = [floor_](const EquationResidual& e, double rel) {
        return e.sup <= std::max(rel * e.scale, floor_);
    };
    rep.plausible_solution =
        ok(rep.mass, 1e-6) && ok(rep.momentum, 0.02) && ok(rep.energy, 0.02);
    return rep;
}

/// One named bound with its worst margin; holds iff the margin is <= 1.
struct BoundCheckReport {
    std::string name;
    bool holds = false;
    double worst_margin = 0.0;
    double empirical_constant = 0.0;
};

struct KernelLemmaReport {
    BoundCheckReport pointwise;   // r^{n-2} G(r,1) <= 1 over the grid
    bool hypothesis_satisfied = false;  // eps <= n omega / ((n-2) mu)
    double c0 = 0.0;              // kernel-integral constant on test powers
};

/// Checks the decay-kernel bounds on the given grid. The pointwise bound
/// r^{n-2} G(r,1) <= 1 is guaranteed under the flux-smallness hypothesis;
/// the integral constant c0 normalizes the kernel integral of s^{-l},
/// l in {-n, 0, n-2}, by its leading-order value mu*eps/(n*omega) and
/// must stay bounded across eps and mu for the estimates to be uniform.
inline KernelLemmaReport check_kernel_lemma(const Parameters& p,
                                            const DerivedConstants& d,
                                            const GridPtr& g) {
    const int n = p.n;
    const double eps = d.epsilon_inflow ? *d.epsilon_inflow
                                        : std::abs(p.u_minus) / p.v_plus;
    if (!(eps > 0.0))
        throw std::domain_error("kernel bounds need a nonzero mass flux");
    const double a = d.omega / (d.mu * eps);

    KernelLemmaReport rep;
    rep.hypothesis_satisfied = eps <= n * d.omega / ((n - 2) * d.mu);
    rep.pointwise.name = "lemma.pointwise";
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double r = (*g)[i];
        const double v = std::pow(r, n - 2) * kernel_G(r, 1.0, n, a);
        rep.pointwise.worst_margin = std::max(rep.pointwise.worst_margin, v);
    }
    rep.pointwise.holds = rep.pointwise.worst_margin <= 1.0 + 1e-12;
    rep.pointwise.empirical_constant = rep.pointwise.worst_margin;

    const double lead = d.mu * eps / (n * d.omega); // = 1/(a n)
    for (double l : {static_cast<double>(-n), 0.0, static_cast<double>(n - 2)}) {
        SampledField f(g);
        for (std::size_t i = 0; i < g->size(); ++i)
            f[i] = std::pow((*g)[i], (n - 1) - l);
        const std::vector<double> k = kernel_prefix_integrals(f, n, a);
        for (std::size_t i = 1; i < g->size(); ++i) {
            const double r = (*g)[i];
            const double c = std::abs(k[i]) * std::pow(r, l) / lead;
            rep.c0 = std::max(rep.c0, c);
        }
    }
    return rep;
}

struct TheoremBoundReport {
    double empirical_C = 0.0;   // max weighted norm over boundary-data size
    double norm_eta = 0.0;
    double norm_chi = 0.0;
    double data_size = 0.0;
    double velocity_band_sup = 0.0;  // sup_r r^{n-1} |u| / |u_-|
    double velocity_band_inf = 0.0;
    bool velocity_band_positive = false;
    bool velocity_applicable = false;
};

/// Estimates the constants the existence theorem only proves to exist:
/// the ratio of the weighted solution norms to the boundary-data size,
/// and the two-sided band r^{n-1}|u| ~ |u_-|.
inline TheoremBoundReport check_theorem_bounds(const StationarySolution& sol,
                                               const PhysicalProfile& prof,
                                               const Parameters& p) {
    const double l = static_cast<double>(p.n - 2);
    TheoremBoundReport rep;
    rep.norm_eta = weighted_norm(sol.state.eta, l);
    rep.norm_chi = weighted_norm(sol.state.chi, l);
    rep.data_size = classify_regime(p) == FlowRegime::Inflow
                        ? std::abs(p.u_minus) + std::abs(p.eta_minus) +
                              std::abs(p.chi_minus)
                        : std::abs(p.u_minus) + std::abs(p.chi_minus);
    if (rep.data_size > 0.0)
        rep.empirical_C = std::max(rep.norm_eta, rep.norm_chi) / rep.data_size;

    if (p.u_minus != 0.0) {
        rep.velocity_applicable = true;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        const RadialGrid& g = *prof.u.grid;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double b = std::pow(g[i], p.n - 1) * std::abs(prof.u[i]) /
                             std::abs(p.u_minus);
            lo = std::min(lo, b);
            hi = std::max(hi, b);
        }
        rep.velocity_band_inf = lo;
        rep.velocity_band_sup = hi;
        rep.velocity_band_positive = lo > 0.0;
    }
    return rep;
}

/// Impermeable closed form: u = 0 and the only data is chi_-, so the
/// temperature deviation chi_- r^{-(n-2)} gives C = 1 exactly.
inline TheoremBoundReport check_theorem_bounds(const PhysicalProfile& prof,
                                               const Parameters& p) {
    const double l = static_cast<double>(p.n - 2);
    SampledField chi = prof.chi;
    if (chi.size() != prof.theta.size()) {
        chi = SampledField(prof.theta.grid);
        for (std::size_t i = 0; i < chi.size(); ++i)
            chi[i] = prof.theta[i] - p.theta_plus;
    }
    chi.set_tail(l);

    TheoremBoundReport rep;
    rep.norm_chi = weighted_norm(chi, l);
    rep.data_size = std::abs(p.chi_minus);
    if (rep.data_size > 0.0) rep.empirical_C = rep.norm_chi / rep.data_size;
    return rep;
}

struct SweepRow {
    double axis_value = 0.0;
    bool converged = false;
    int iterations = 0;
    std::string diagnostic;
    double norm_eta = 0.0, norm_chi = 0.0;
    double empirical_C = 0.0;
    double exp_eta = 0.0, exp_chi = 0.0, exp_u = 0.0;  // NaN when unfittable
    double layer_amplitude = 0.0;  // |rho(1) - rho_+ theta_+ / theta_-|
    double interior_gap = 0.0;     // distance to the zero-flux limit at 1+delta
};

struct SweepTable {
    std::string axis;
    std::vector<SweepRow> rows;
    std::size_t failed = 0;
};

struct SweepOptions {
    double r_max = 200.0;
    std::size_t nodes = 4096;
    IterationControl control;
    double probe_delta = 0.5;  // interior probe offset for the layer trend
    std::size_t workers = 0;   // 0: EXFLOW_WORKERS env var, else hardware
};

namespace detail {

inline std::size_t worker_count(std::size_t requested, std::size_t jobs) {
    std::size_t w = requested;
    if (w == 0) {
        if (const char* env = std::getenv("EXFLOW_WORKERS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v > 0) w = static_cast<std::size_t>(v);
        }
    }
    if (w == 0) w = std::thread::hardware_concurrency();
    if (w == 0) w = 1;
    return std::min(w, jobs);
}

inline Parameters apply_axis(const Parameters& base, const std::string& axis,
                             double value) {
    Parameters p = base;
    if (axis == "u_minus") p.u_minus = value;
    else if (axis == "eta_minus") p.eta_minus = value;
    else if (axis == "chi_minus") p.chi_minus = value;
    else if (axis == "mu") {
        // keep nu/mu = 1/2, within the admissible ratio for every n >= 3
        if (!(value > 0.0)) throw ValidationError("mu > 0 required in sweep");
        p.nu = value / 2.0;
        p.lambda = 0.0;
    } else
        throw ValidationError("unknown sweep axis: " + axis);
    if (!(p.v_minus() > 0.0)) throw ValidationError("v_- > 0 violated in sweep");
    if (!(p.theta_minus() > 0.0))
        throw ValidationError("theta_- > 0 violated in sweep");
    return p;
}

inline SweepRow sweep_row(const Parameters& p, double value,
                          const SweepOptions& opt) {
    SweepRow row;
    row.axis_value = value;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.exp_eta = row.exp_chi = row.exp_u = nan;
    try {
        const DerivedConstants d = derive_constants(p);
        const double eps_scale = d.epsilon_inflow
                                     ? *d.epsilon_inflow
                                     : std::abs(p.u_minus) / p.v_plus;
        const GridPtr g = make_grid(p, d, opt.r_max, opt.nodes,
                                    d.mu * eps_scale / (p.n * d.omega));
        const StationarySolution sol = solve_stationary(p, d, g, opt.control);
        row.converged = sol.converged;
        row.iterations = sol.iterations;
        row.diagnostic = sol.diagnostic;
        if (!sol.converged) return row;

        const double l = static_cast<double>(p.n - 2);
        row.norm_eta = weighted_norm(sol.state.eta, l);
        row.norm_chi = weighted_norm(sol.state.chi, l);
        const PhysicalProfile prof = reconstruct_physical(sol, p);
        row.empirical_C = check_theorem_bounds(sol, prof, p).empirical_C;

        const auto [lo, hi] = default_fit_window(opt.r_max);
        auto try_fit = [&](const SampledField& f) {
            try { return fit_decay_exponent(f, lo, hi).exponent; }
            catch (const std::domain_error&) { return nan; }
        };
        row.exp_eta = try_fit(sol.state.eta);
        row.exp_chi = try_fit(sol.state.chi);
        row.exp_u = try_fit(prof.u);

        const double rho_limit = p.rho_plus() * p.theta_plus / p.theta_minus();
        row.layer_amplitude = std::abs(prof.rho[0] - rho_limit);
        const double rp = 1.0 + opt.probe_delta;
        std::size_t ip = 0;
        const RadialGrid& gr = *g;
        for (std::size_t i = 1; i < gr.size(); ++i)
            if (std::abs(gr[i] - rp) < std::abs(gr[ip] - rp)) ip = i;
        const double theta_tilde =
            p.theta_plus + (p.theta_minus() - p.theta_plus) *
                               std::pow(gr[ip], -(p.n - 2));
        row.interior_gap = std::abs(prof.rho[ip] -
                                    p.rho_plus() * p.theta_plus / theta_tilde);
    } catch (const std::exception& e) {
        row.converged = false;
        row.diagnostic = e.what();
    }
    return row;
}

} // namespace detail

/// Solves one configuration per axis value and records the observables the
/// theorems speak about. Rows are ordered by axis value; individual solve
/// failures are recorded in the row and do not abort the sweep. Rows run
/// on a worker pool capped by EXFLOW_WORKERS (or hardware concurrency).
inline SweepTable sweep(const std::string& axis, std::vector<double> values,
                        const Parameters& base, const SweepOptions& opt = {}) {
    if (values.empty()) throw ValidationError("empty sweep axis");
    std::sort(values.begin(), values.end());

    // validate every configuration up front so axis errors throw, not fail rows
    std::vector<Parameters> configs;
    configs.reserve(values.size());
    for (double v : values) configs.push_back(detail::apply_axis(base, axis, v));

    SweepTable table;
    table.axis = axis;
    table.rows.resize(values.size());

    const std::size_t workers = detail::worker_count(opt.workers, values.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= values.size()) break;
            table.rows[i] = detail::sweep_row(configs[i], values[i], opt);
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (const SweepRow& r : table.rows)
        if (!r.converged) ++table.failed;
    return table;
}

} // namespace exflow
