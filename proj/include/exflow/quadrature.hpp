#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "exflow/grid.hpp"
#include "exflow/kernel.hpp"

namespace exflow {
namespace detail {

// phi0(z) = (1 - e^-z)/z and psi(z) = (1 - e^-z (1+z))/z^2, the exponential
// moments of the product rule. psi cancels badly for small z; switch to the
// series sum_k (-z)^k (k+1)/(k+2)!.
inline double phi0(double z) {
    if (z < 1e-12) return 1.0 - 0.5 * z;
    if (z > 745.0) return 1.0 / z;
    return -std::expm1(-z) / z;
}

inline double psi(double z) {
    if (z < 0.5) {
        double term = 0.5; // k = 0
        double acc = term;
        double fact = 2.0; // (k+2)!
        double zk = 1.0;
        for (int k = 1; k <= 12; ++k) {
            zk *= -z;
            fact *= static_cast<double>(k + 2);
            term = zk * static_cast<double>(k + 1) / fact;
            acc += term;
        }
        return acc;
    }
    if (z > 745.0) return 1.0 / (z * z);
    return (1.0 - std::exp(-z) * (1.0 + z)) / (z * z);
}

// Per-node integrand g(t) = f(s)/(n s^{n-1}) of the substitution t = s^n.
inline std::vector<double> substituted_integrand(const SampledField& f, int n) {
    std::vector<double> g(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double s = (*f.grid)[i];
        g[i] = f[i] / (static_cast<double>(n) * std::pow(s, n - 1));
    }
    return g;
}

// 3-point finite-difference slopes on a non-uniform mesh (one-sided at ends).
inline std::vector<double> fd_slopes(const std::vector<double>& x,
                                     const std::vector<double>& y) {
    const std::size_t m = x.size();
    std::vector<double> d(m, 0.0);
    if (m < 3) {
        if (m == 2) d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
        return d;
    }
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double hl = x[i] - x[i - 1];
        const double hr = x[i + 1] - x[i];
        d[i] = (hl * hl * y[i + 1] - hr * hr * y[i - 1] +
                (hr * hr - hl * hl) * y[i]) /
               (hl * hr * (hl + hr));
    }
    {
        const double h0 = x[1] - x[0], h1 = x[2] - x[1];
        d[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[0] +
               (h0 + h1) / (h0 * h1) * y[1] -
               h0 / (h1 * (h0 + h1)) * y[2];
        const double g0 = x[m - 2] - x[m - 3], g1 = x[m - 1] - x[m - 2];
        d[m - 1] = g1 / (g0 * (g0 + g1)) * y[m - 3] -
                   (g0 + g1) / (g0 * g1) * y[m - 2] +
                   (2.0 * g1 + g0) / (g1 * (g0 + g1)) * y[m - 1];
    }
    return d;
}

// Hermite-corrected trapezoid integrals of one mesh interval each:
// int_{x_j}^{x_{j+1}} y dx ~ h/2 (y_j + y_{j+1}) - h^2/12 (d_{j+1} - d_j).
inline std::vector<double> interval_integrals(const std::vector<double>& x,
                                              const std::vector<double>& y) {
    const std::vector<double> d = fd_slopes(x, y);
    std::vector<double> q(x.size() - 1);
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        const double h = x[j + 1] - x[j];
        q[j] = 0.5 * h * (y[j] + y[j + 1]) - h * h / 12.0 * (d[j + 1] - d[j]);
    }
    return q;
}

} // namespace detail

/// Forward sweep of the inflow kernel operator: returns the whole family
/// I(r_i) = int_1^{r_i} exp(-a (r_i^n - s^n)) f(s) ds in O(N), using the
/// recursion I(t_{i+1}) = e^{-a dt} I(t_i) + local moment in t = s^n.
/// Exact for f(s) = c s^{n-1}; second order otherwise.
inline std::vector<double> kernel_prefix_integrals(const SampledField& f, int n,
                                                   double a) {
    if (!(a > 0.0)) throw std::domain_error("decay coefficient a must be positive");
    const RadialGrid& grid = *f.grid;
    const std::vector<double> g = detail::substituted_integrand(f, n);
    std::vector<double> out(f.size(), 0.0);
    for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        const double dt = power_diff(grid[i + 1], grid[i], n);
        const double z = a * dt;
        const double E = detail::exp_flush(-z);
        const double q = dt * (g[i] * detail::psi(z) +
                               g[i + 1] * (detail::phi0(z) - detail::psi(z)));
        out[i + 1] = E * out[i] + q;
    }
    return out;
}

/// int_1^r G(r,s) f(s) ds at a single grid node.
inline double integrate_kernel_from_boundary(const SampledField& f, double r, int n,
                                             double a) {
    const std::size_t idx = node_index(*f.grid, r);
    const RadialGrid& grid = *f.grid;
    const std::vector<double> g = detail::substituted_integrand(f, n);
    double acc = 0.0;
    if (!(a > 0.0)) throw std::domain_error("decay coefficient a must be positive");
    for (std::size_t i = 0; i < idx; ++i) {
        const double dt = power_diff(grid[i + 1], grid[i], n);
        const double z = a * dt;
        acc = detail::exp_flush(-z) * acc +
              dt * (g[i] * detail::psi(z) +
                    g[i + 1] * (detail::phi0(z) - detail::psi(z)));
    }
    return acc;
}

/// Backward sweep of the outflow kernel operator: the whole family
/// J(r_i) = int_{r_i}^inf exp(-b (s^n - r_i^n)) f(s) ds in O(N). The
/// contribution beyond R_max closes with f(R_max)/(b n R_max^{n-1}).
inline std::vector<double> kernel_suffix_integrals(const SampledField& f, int n,
                                                   double b) {
    if (!(b > 0.0)) throw std::domain_error("decay coefficient b must be positive");
    if (!f.tail_valid) throw std::domain_error("tail closure unavailable");
    const RadialGrid& grid = *f.grid;
    const std::vector<double> g = detail::substituted_integrand(f, n);
    std::vector<double> out(f.size(), 0.0);
    const std::size_t m = f.size();
    out[m - 1] = g[m - 1] / b; // = f(R_max)/(b n R_max^{n-1})
    for (std::size_t i = m - 1; i-- > 0;) {
        const double dt = power_diff(grid[i + 1], grid[i], n);
        const double z = b * dt;
        const double q = dt * (g[i + 1] * detail::psi(z) +
                               g[i] * (detail::phi0(z) - detail::psi(z)));
        out[i] = detail::exp_flush(-z) * out[i + 1] + q;
    }
    return out;
}

/// int_r^inf G~(r,s) f(s) ds at a single grid node.
inline double integrate_kernel_to_infinity(const SampledField& f, double r, int n,
                                           double b) {
    const std::size_t idx = node_index(*f.grid, r);
    return kernel_suffix_integrals(f, n, b)[idx];
}

namespace detail {
inline void check_tail_integrable(const SampledField& f, double extra_power) {
    if (!f.tail_valid) throw std::domain_error("tail closure unavailable");
    if (!(f.tail_exponent + extra_power > 1.0))
        throw std::domain_error("non-integrable tail: l + q <= 1");
}

inline double powerlaw_tail_closure(const SampledField& f, double extra_power) {
    const double R = f.grid->r_max;
    return f.back() * std::pow(R, 1.0 - extra_power) /
           (f.tail_exponent + extra_power - 1.0);
}

inline std::vector<double> weighted_interval_integrals(const SampledField& f,
                                                       double extra_power) {
    const RadialGrid& grid = *f.grid;
    std::vector<double> h(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        h[i] = f[i] * std::pow(grid[i], -extra_power);
    return interval_integrals(grid.nodes, h);
}
} // namespace detail

/// int_r^inf f(s) s^{-extra_power} ds: quadrature over [r, R_max] plus the
/// closed-form power-law tail beyond R_max.
inline double tail_integral_powerlaw(const SampledField& f, double r,
                                     double extra_power) {
    detail::check_tail_integrable(f, extra_power);
    const std::size_t idx = node_index(*f.grid, r);
    const std::vector<double> q = detail::weighted_interval_integrals(f, extra_power);
    double acc = 0.0;
    for (std::size_t j = idx; j < q.size(); ++j) acc += q[j];
    return acc + detail::powerlaw_tail_closure(f, extra_power);
}

/// All-nodes evaluation of tail_integral_powerlaw in one backward sweep.
/// The result field carries tail exponent l + extra_power - 1.
inline SampledField cumulative_tail_integrals(const SampledField& f,
                                              double extra_power) {
    detail::check_tail_integrable(f, extra_power);
    const std::vector<double> q = detail::weighted_interval_integrals(f, extra_power);
    SampledField out(f.grid);
    const std::size_t m = f.size();
    out[m - 1] = detail::powerlaw_tail_closure(f, extra_power);
    for (std::size_t i = m - 1; i-- > 0;) out[i] = out[i + 1] + q[i];
    out.set_tail(f.tail_exponent + extra_power - 1.0);
    return out;
}

} // namespace exflow
