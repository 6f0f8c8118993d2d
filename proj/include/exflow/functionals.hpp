#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "exflow/grid.hpp"
#include "exflow/model.hpp"
#include "exflow/quadrature.hpp"

namespace exflow {

/// Raised when an iterate leaves the admissible set (v_+ + eta <= 0 or
/// theta_+ + chi <= 0 at some node).
class AdmissibilityError : public std::runtime_error {
public:
    AdmissibilityError(const std::string& what_, double radius)
        : std::runtime_error(what_ + " at r = " + std::to_string(radius)) {}
};

inline void check_specific_volume(const SampledField& eta, double v_plus) {
    for (std::size_t i = 0; i < eta.size(); ++i)
        if (!(v_plus + eta[i] > 0.0))
            throw AdmissibilityError("specific volume collapse", (*eta.grid)[i]);
}

/// Pointwise value of the nonlinear remainder F; z is the tail integral
/// int_r^inf eta(s)/s^{2n-1} ds evaluated at r. The chi*eta term is the
/// quadratic remainder of p - p_+ = R(v_+ chi - theta_+ eta)/(v_+(v_+ + eta))
/// after extracting the linear parts, hence its minus sign; flipping it
/// leaves a flux-independent momentum residual of size ~ 2R|chi eta|.
inline double F_pointwise(double r, double eta, double chi, double z,
                          const Parameters& p, const DerivedConstants& d,
                          double eps) {
    const int n = p.n;
    const double rn1 = std::pow(r, n - 1);
    const double v = p.v_plus + eta;
    return -p.R_gas * rn1 * chi * eta / (eps * d.mu * p.v_plus * v) +
           p.R_gas * p.theta_plus * rn1 * eta * eta /
               (eps * d.mu * p.v_plus * p.v_plus * v) +
           eps * p.v_plus / (2.0 * d.mu * rn1) + eps * eta / (d.mu * rn1) -
           eps * (n - 1) * rn1 / d.mu * z;
}

/// Pointwise viscous-heating remainder (the integrand of w).
inline double Phi_pointwise(double r, double eta, double zeta, const Parameters& p,
                            double eps) {
    const int n = p.n;
    const double v = p.v_plus + eta;
    const double e2nu = eps * eps * p.nu;
    return -4.0 * e2nu * (n - 1) * v * zeta / std::pow(r, n) +
           2.0 * e2nu * n * (n - 1) * v * v / std::pow(r, n + 1);
}

/// Nonlinear remainder of the specific-volume equation. The nonlocal term
/// takes the precomputed cumulative integral of eta(s)/s^{2n-1}.
inline SampledField F_nonlinearity(const SampledField& eta, const SampledField& chi,
                                   const SampledField& tail_eta,
                                   const Parameters& p, const DerivedConstants& d,
                                   double eps) {
    if (eps == 0.0) throw std::domain_error("F undefined at eps = 0");
    check_specific_volume(eta, p.v_plus);
    SampledField out(eta.grid);
    for (std::size_t i = 0; i < eta.size(); ++i)
        out[i] = F_pointwise((*eta.grid)[i], eta[i], chi[i], tail_eta[i], p, d, eps);
    return out;
}

/// Viscous-heating remainder of the integrated energy equation.
inline SampledField Phi_dissipation(const SampledField& eta, const SampledField& zeta,
                                    const Parameters& p, double eps) {
    if (!same_grid(eta, zeta)) throw std::domain_error("fields on different grids");
    const int n = p.n;
    SampledField out(eta.grid);
    for (std::size_t i = 0; i < eta.size(); ++i)
        out[i] = Phi_pointwise((*eta.grid)[i], eta[i], zeta[i], p, eps);
    // dominated by the (v_+ + eta)^2 / r^{n+1} part once zeta decays, but
    // early iterates can have zeta ~ r, so close the tail conservatively
    out.set_tail(static_cast<double>(n - 1));
    return out;
}

/// Energy functional H: two nested backward sweeps, each term closed with
/// its own analytic tail exponent. Result decays like r^{-(2n-4)}.
inline SampledField H_functional(const SampledField& eta, const SampledField& zeta,
                                 const SampledField& chi,
                                 const Parameters& p, const DerivedConstants& d,
                                 double eps) {
    if (!eta.tail_valid || !chi.tail_valid)
        throw std::domain_error("tail closure unavailable");
    const int n = p.n;
    const double e2nu = eps * eps * p.nu;

    // inner sweep: W(tau) = int_tau^inf Phi, term by term
    SampledField q1(eta.grid), q2(eta.grid);
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double v = p.v_plus + eta[i];
        q1[i] = -4.0 * e2nu * (n - 1) * v * zeta[i];
        q2[i] = 2.0 * e2nu * n * (n - 1) * v * v;
    }
    q1.set_tail(static_cast<double>(n - 1)); // zeta decays like the derivative field
    q2.set_tail(0.0);
    const SampledField w1 = cumulative_tail_integrals(q1, static_cast<double>(n));
    const SampledField w2 = cumulative_tail_integrals(q2, static_cast<double>(n + 1));
    SampledField w(eta.grid);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = w1[i] + w2[i];
    w.set_tail(std::min(w1.tail_exponent, w2.tail_exponent));

    // outer sweep integrands
    SampledField a(eta.grid), b2(eta.grid), c(eta.grid);
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double v = p.v_plus + eta[i];
        a[i] = eps * d.c_P * chi[i];
        b2[i] = 0.5 * eps * eps * eps * v * v;
        c[i] = -eps * eps * d.mu * v * zeta[i];
    }
    a.set_tail(chi.tail_exponent);
    b2.set_tail(0.0);
    c.set_tail(static_cast<double>(n - 1));

    const SampledField t1 = cumulative_tail_integrals(a, static_cast<double>(n - 1));
    const SampledField t2 = cumulative_tail_integrals(b2, 3.0 * (n - 1));
    const SampledField t3 = cumulative_tail_integrals(c, 2.0 * (n - 1));
    const SampledField t4 = cumulative_tail_integrals(w, static_cast<double>(n - 1));

    SampledField out(eta.grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = -(t1[i] + t2[i] + t3[i] + t4[i]) / p.kappa;
    out.set_tail(2.0 * n - 4.0);
    return out;
}

} // namespace exflow
