#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "exflow/functionals.hpp"
#include "exflow/grid.hpp"
#include "exflow/kernel.hpp"
#include "exflow/model.hpp"
#include "exflow/norms.hpp"
#include "exflow/quadrature.hpp"

namespace exflow {

/// One Picard iterate: the deviation fields, their derivative field, the
/// energy integration constant and the mass-flux constant. Immutable
/// snapshot; iteration produces a new state each step.
struct IterationState {
    SampledField eta;   // specific-volume deviation
    SampledField chi;   // temperature deviation
    SampledField zeta;  // eta_r
    double alpha = 0.0;
    double epsilon = 0.0;
    int m = 0;
    std::vector<double> increment_norms;
};

struct StationarySolution {
    IterationState state;
    bool converged = false;
    int iterations = 0;
    double final_increment = 0.0;
    std::vector<double> contraction_ratios;
    double fixed_point_residual = 0.0; // increment of one extra map application
    bool outside_smallness = false;
    std::string diagnostic;
};

struct PhysicalProfile {
    SampledField rho, u, theta, pressure;
    SampledField eta, chi, zeta; // deviation fields, kept at full precision
    double mass_flux = 0.0;
};

struct IterationControl {
    double tol = 1e-10;
    int max_iter = 200;
};

namespace detail {

inline void check_temperature(const SampledField& chi, double theta_plus) {
    for (std::size_t i = 0; i < chi.size(); ++i)
        if (!(theta_plus + chi[i] > 0.0))
            throw AdmissibilityError("iterate left admissible set (temperature)",
                                     (*chi.grid)[i]);
}

// zeta^{(m+1)} from level-m fields: the pointwise derivative formula.
inline SampledField zeta_update(const SampledField& eta, const SampledField& chi,
                                const SampledField& F, const Parameters& p,
                                const DerivedConstants& d, double eps) {
    SampledField z(eta.grid);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double rn1 = std::pow((*z.grid)[i], p.n - 1);
        z[i] = -p.R_gas * p.theta_plus * rn1 * eta[i] /
                   (eps * d.mu * p.v_plus * p.v_plus) +
               p.R_gas * rn1 * chi[i] / (eps * d.mu * p.v_plus) + F[i];
    }
    return z;
}

// chi^{(m+1)} = (chi_- - H(1)) r^{-(n-2)} + H(r); exact at r = 1.
inline SampledField chi_update(const SampledField& H, const Parameters& p,
                               double* alpha_out) {
    SampledField chi(H.grid);
    const double h1 = H[0];
    const double c = p.chi_minus - h1;
    for (std::size_t i = 0; i < chi.size(); ++i)
        chi[i] = c * std::pow((*chi.grid)[i], -(p.n - 2)) + H[i];
    chi.set_tail(static_cast<double>(p.n - 2));
    if (alpha_out) *alpha_out = p.kappa * (p.n - 2) * c;
    return chi;
}

} // namespace detail

inline IterationState seed_state(const Parameters& p, const DerivedConstants& d,
                                 const GridPtr& g) {
    IterationState s;
    s.eta = SampledField(g);
    s.chi = SampledField(g);
    s.zeta = SampledField(g);
    s.eta.set_tail(static_cast<double>(p.n - 2));
    s.chi.set_tail(static_cast<double>(p.n - 2));
    s.m = 0;
    switch (classify_regime(p)) {
        case FlowRegime::Inflow: {
            s.epsilon = *d.epsilon_inflow;
            const double a = d.omega / (d.mu * s.epsilon);
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double r = (*g)[i];
                s.eta[i] = kernel_G(r, 1.0, p.n, a) * p.eta_minus;
                s.chi[i] = p.chi_minus * std::pow(r, -(p.n - 2));
            }
            s.alpha = p.kappa * (p.n - 2) * p.chi_minus;
            break;
        }
        case FlowRegime::Outflow:
            s.epsilon = p.u_minus / p.v_plus; // eta^{(0)} = 0
            s.alpha = p.kappa * (p.n - 2) * p.chi_minus;
            break;
        case FlowRegime::Impermeable:
            throw std::domain_error("impermeable regime has a closed form");
    }
    return s;
}

inline IterationState inflow_iterate(const IterationState& s, const Parameters& p,
                                     const DerivedConstants& d, const GridPtr& g) {
    const double eps = *d.epsilon_inflow;
    const double a = d.omega / (d.mu * eps);
    const int n = p.n;

    const SampledField z_eta = cumulative_tail_integrals(s.eta, 2.0 * n - 1.0);
    const SampledField F = F_nonlinearity(s.eta, s.chi, z_eta, p, d, eps);

    IterationState next;
    next.m = s.m + 1;
    next.epsilon = eps;
    next.zeta = detail::zeta_update(s.eta, s.chi, F, p, d, eps);
    const SampledField H = H_functional(s.eta, next.zeta, s.chi, p, d, eps);
    next.chi = detail::chi_update(H, p, &next.alpha);

    SampledField chi_weighted(g);
    for (std::size_t i = 0; i < g->size(); ++i)
        chi_weighted[i] = next.chi[i] * std::pow((*g)[i], n - 1);
    const std::vector<double> k_chi = kernel_prefix_integrals(chi_weighted, n, a);
    const std::vector<double> k_F = kernel_prefix_integrals(F, n, a);

    next.eta = SampledField(g);
    const double lin = p.R_gas / (eps * d.mu * p.v_plus);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double r = (*g)[i];
        next.eta[i] = kernel_G(r, 1.0, n, a) * p.eta_minus + lin * k_chi[i] + k_F[i];
    }
    next.eta.set_tail(static_cast<double>(n - 2));

    check_specific_volume(next.eta, p.v_plus);
    detail::check_temperature(next.chi, p.theta_plus);
    next.increment_norms = s.increment_norms;
    return next;
}

inline IterationState outflow_iterate(const IterationState& s, const Parameters& p,
                                      const DerivedConstants& d, const GridPtr& g) {
    const double eta1 = s.eta.size() ? s.eta[0] : 0.0;
    if (!(p.v_plus + eta1 > 0.0))
        throw AdmissibilityError("iterate left admissible set (eta(1))", 1.0);
    const double eps = p.u_minus / (p.v_plus + eta1);
    const double b = d.omega_bar / (std::abs(p.u_minus) * d.mu);
    const int n = p.n;

    const SampledField z_eta = cumulative_tail_integrals(s.eta, 2.0 * n - 1.0);
    const SampledField F = F_nonlinearity(s.eta, s.chi, z_eta, p, d, eps);

    IterationState next;
    next.m = s.m + 1;
    next.epsilon = eps;
    next.zeta = detail::zeta_update(s.eta, s.chi, F, p, d, eps);
    const SampledField H = H_functional(s.eta, next.zeta, s.chi, p, d, eps);
    next.chi = detail::chi_update(H, p, &next.alpha);

    // the eta(1)-dependence sits in the explicit linear term, so the kernel
    // decay coefficient uses u_- directly
    SampledField rhs(g);
    const double lin0 = -p.R_gas * p.theta_plus * eta1 /
                        (p.u_minus * d.mu * p.v_plus * p.v_plus);
    const double lin1 = p.R_gas / (eps * d.mu * p.v_plus);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double rn1 = std::pow((*g)[i], n - 1);
        rhs[i] = lin0 * rn1 * s.eta[i] + lin1 * rn1 * next.chi[i] + F[i];
    }
    rhs.set_tail(0.0); // closure uses only the end value under the kernel

    const std::vector<double> k = kernel_suffix_integrals(rhs, n, b);
    next.eta = SampledField(g);
    for (std::size_t i = 0; i < g->size(); ++i) next.eta[i] = -k[i];
    next.eta.set_tail(static_cast<double>(n - 2));

    check_specific_volume(next.eta, p.v_plus);
    detail::check_temperature(next.chi, p.theta_plus);
    if (eps * p.u_minus <= 0.0)
        throw AdmissibilityError("mass-flux sign flip", 1.0);
    next.increment_norms = s.increment_norms;
    return next;
}

inline IterationState iterate_once(const IterationState& s, const Parameters& p,
                                   const DerivedConstants& d, const GridPtr& g) {
    return classify_regime(p) == FlowRegime::Inflow ? inflow_iterate(s, p, d, g)
                                                    : outflow_iterate(s, p, d, g);
}

inline double increment_norm(const IterationState& a, const IterationState& b,
                             const Parameters& p) {
    const double l = static_cast<double>(p.n - 2);
    SampledField de(a.eta.grid), dc(a.eta.grid);
    for (std::size_t i = 0; i < de.size(); ++i) {
        de[i] = b.eta[i] - a.eta[i];
        dc[i] = b.chi[i] - a.chi[i];
    }
    return weighted_norm(de, l) + weighted_norm(dc, l);
}

/// Picard iteration in X_{n-2} until the increment falls below tol.
/// Non-convergence after max_iter and sustained increment growth both end
/// the run with converged = false and a diagnostic.
inline StationarySolution solve_stationary(const Parameters& p,
                                           const DerivedConstants& d,
                                           const GridPtr& g,
                                           const IterationControl& control) {
    const FlowRegime regime = classify_regime(p);
    if (regime == FlowRegime::Impermeable)
        throw std::domain_error("impermeable regime has a closed form");

    StationarySolution sol;
    sol.outside_smallness = !smallness_check(p).all();

    IterationState cur = seed_state(p, d, g);
    double prev_inc = 0.0;
    int growth_streak = 0;
    for (int it = 0; it < control.max_iter; ++it) {
        IterationState next = iterate_once(cur, p, d, g);
        const double inc = increment_norm(cur, next, p);
        next.increment_norms.push_back(inc);
        if (it > 0 && prev_inc > 0.0)
            sol.contraction_ratios.push_back(inc / prev_inc);
        if (it > 0 && inc > prev_inc) ++growth_streak;
        else growth_streak = 0;
        cur = std::move(next);
        sol.iterations = it + 1;
        sol.final_increment = inc;
        if (inc <= control.tol) {
            sol.converged = true;
            break;
        }
        if (growth_streak >= 5) {
            sol.diagnostic = "diverging: increment grew over 5 consecutive iterations";
            break;
        }
        prev_inc = inc;
    }
    if (!sol.converged && sol.diagnostic.empty())
        sol.diagnostic = "max_iter exceeded";

    if (sol.converged) {
        const IterationState extra = iterate_once(cur, p, d, g);
        sol.fixed_point_residual = increment_norm(cur, extra, p);
    }
    sol.state = std::move(cur);
    return sol;
}

/// Physical fields from a converged deviation pair. The mass-flux identity
/// r^{n-1} rho u = eps holds by construction.
inline PhysicalProfile reconstruct_physical(const StationarySolution& sol,
                                            const Parameters& p) {
    const GridPtr g = sol.state.eta.grid;
    const int n = p.n;
    PhysicalProfile prof;
    prof.rho = SampledField(g);
    prof.u = SampledField(g);
    prof.theta = SampledField(g);
    prof.pressure = SampledField(g);
    const double denom = classify_regime(p) == FlowRegime::Inflow
                             ? p.v_minus()
                             : p.v_plus + sol.state.eta[0];
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double v = p.v_plus + sol.state.eta[i];
        const double r = (*g)[i];
        prof.rho[i] = 1.0 / v;
        prof.u[i] = p.u_minus * v / (denom * std::pow(r, n - 1));
        prof.theta[i] = p.theta_plus + sol.state.chi[i];
        prof.pressure[i] = p.R_gas * prof.rho[i] * prof.theta[i];
    }
    prof.rho.set_tail(0.0);
    prof.theta.set_tail(0.0);
    prof.pressure.set_tail(0.0);
    prof.u.set_tail(static_cast<double>(n - 1));
    prof.eta = sol.state.eta;
    prof.chi = sol.state.chi;
    prof.zeta = sol.state.zeta;
    prof.zeta.set_tail(static_cast<double>(n - 1));
    // recomputed from the converged eta(1) so the identity is exact
    prof.mass_flux = p.u_minus / denom;
    return prof;
}

/// Closed form for the impermeable wall: theta = theta_+ + chi_- r^{-(n-2)},
/// rho theta = rho_+ theta_+, u = 0.
inline PhysicalProfile impermeable_solution(const Parameters& p, const GridPtr& g) {
    if (classify_regime(p) != FlowRegime::Impermeable)
        throw std::domain_error("impermeable_solution requires u_- = 0");
    PhysicalProfile prof;
    prof.rho = SampledField(g);
    prof.u = SampledField(g);
    prof.theta = SampledField(g);
    prof.pressure = SampledField(g);
    prof.eta = SampledField(g);
    prof.chi = SampledField(g);
    prof.zeta = SampledField(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double r = (*g)[i];
        const double chi = p.chi_minus * std::pow(r, -(p.n - 2));
        const double theta = p.theta_plus + chi;
        prof.theta[i] = theta;
        prof.rho[i] = p.rho_plus() * p.theta_plus / theta;
        prof.u[i] = 0.0;
        prof.pressure[i] = p.R_gas * prof.rho[i] * prof.theta[i];
        prof.chi[i] = chi;
        // rho theta = rho_+ theta_+ means v = v_+ theta / theta_+
        prof.eta[i] = p.v_plus * chi / p.theta_plus;
        prof.zeta[i] = -(p.n - 2) * p.v_plus * p.chi_minus *
                       std::pow(r, -(p.n - 1)) / p.theta_plus;
    }
    prof.eta.set_tail(static_cast<double>(p.n - 2));
    prof.chi.set_tail(static_cast<double>(p.n - 2));
    prof.zeta.set_tail(static_cast<double>(p.n - 1));
    prof.rho.set_tail(0.0);
    prof.theta.set_tail(0.0);
    prof.pressure.set_tail(0.0);
    prof.u.set_tail(static_cast<double>(p.n - 1));
    prof.mass_flux = 0.0;
    return prof;
}

} // namespace exflow
