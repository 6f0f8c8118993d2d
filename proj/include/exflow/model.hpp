#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace exflow {

/// Thrown when an input record violates one of the model's validity
/// conditions. The message names the failed condition.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class FlowRegime { Inflow, Impermeable, Outflow };

inline const char* to_string(FlowRegime t) {
    switch (t) {
        case FlowRegime::Inflow: return "inflow";
        case FlowRegime::Impermeable: return "impermeable";
        case FlowRegime::Outflow: return "outflow";
    }
    return "?";
}

/// Physical and boundary constants of the exterior-domain gas model,
/// nondimensionalized so the sphere radius is exactly 1.
///
/// The far-field velocity is identically zero and has no field here; a
/// nonzero far-field velocity in a config is rejected at build time.
struct Parameters {
    int n = 3;               ///< space dimension, n >= 3
    double R_gas = 1.0;      ///< gas constant
    double c_V = 1.5;        ///< specific heat at constant volume
    double nu = 0.5;         ///< shear viscosity
    double lambda = 0.0;     ///< second viscosity
    double kappa = 1.0;      ///< thermal conductivity
    double v_plus = 1.0;     ///< far-field specific volume (1/rho_+)
    double theta_plus = 1.0; ///< far-field temperature
    double u_minus = 0.0;    ///< boundary velocity (sign selects the regime)
    double eta_minus = 0.0;  ///< boundary specific-volume deviation v_- - v_+ (inflow only)
    double chi_minus = 0.0;  ///< boundary temperature deviation theta_- - theta_+

    double mu() const { return 2.0 * nu + lambda; }
    double v_minus() const { return v_plus + eta_minus; }
    double theta_minus() const { return theta_plus + chi_minus; }
    double rho_plus() const { return 1.0 / v_plus; }
};

/// Raw configuration record as read from a config file. Optional fields
/// let build_parameters() report precisely what is missing or illegal.
struct ParameterConfig {
    std::optional<double> n;
    std::optional<double> R_gas, c_V, nu, lambda, kappa;
    std::optional<double> v_plus, theta_plus;
    std::optional<double> u_minus;
    std::optional<double> eta_minus, chi_minus;
    std::optional<double> rho_minus, theta_minus; // alternatives to the deviations
    std::optional<double> u_plus;                 // must be absent or zero
    std::optional<double> r0;                     // physical sphere radius, rescaled away
};

inline FlowRegime classify_regime(const Parameters& p) {
    if (p.u_minus > 0.0) return FlowRegime::Inflow;
    if (p.u_minus < 0.0) return FlowRegime::Outflow;
    return FlowRegime::Impermeable;
}

/// Constants derived once from Parameters: the combined viscosity
/// mu = 2 nu + lambda, c_P, and the kernel decay constants
/// omega = R theta_+ / (v_+^2 n) and omega_bar = R theta_+ / (v_+ n).
/// epsilon_inflow = u_-/v_- is populated only in the inflow regime; for
/// outflow the mass flux depends on the unknown eta(1) and lives with
/// the iteration state.
struct DerivedConstants {
    double mu = 0.0;
    double c_P = 0.0;
    double omega = 0.0;
    double omega_bar = 0.0;
    std::optional<double> epsilon_inflow;
};

inline DerivedConstants derive_constants(const Parameters& p) {
    DerivedConstants d;
    d.mu = p.mu();
    d.c_P = p.R_gas + p.c_V;
    d.omega = p.R_gas * p.theta_plus / (p.v_plus * p.v_plus * p.n);
    d.omega_bar = p.R_gas * p.theta_plus / (p.v_plus * p.n);
    if (classify_regime(p) == FlowRegime::Inflow)
        d.epsilon_inflow = p.u_minus / p.v_minus();
    return d;
}

/// Smallness hypotheses backing the contraction argument. A failing flag
/// is reported, never thrown: the solver may run outside the proven
/// regime, stamped as such. Margins are quantity/bound (<= 1 passes).
struct SmallnessReport {
    bool eta_small = false;    ///< |eta_-| <= v_+/2
    bool flux_small = false;   ///< u_- <= n omega v_+ / (2(n-2) mu)
    bool u_unit = false;       ///< |u_-| <= 1
    double eta_margin = 0.0;
    double flux_margin = 0.0;
    double u_margin = 0.0;
    double data_size = 0.0;    ///< |u_-| + |eta_-| + |chi_-|
    bool all() const { return eta_small && flux_small && u_unit; }
};

inline SmallnessReport smallness_check(const Parameters& p) {
    const DerivedConstants d = derive_constants(p);
    SmallnessReport rep;
    const double eta_bound = p.v_plus / 2.0;
    rep.eta_margin = std::abs(p.eta_minus) / eta_bound;
    rep.eta_small = rep.eta_margin <= 1.0;
    const double flux_bound = p.n * d.omega * p.v_plus / (2.0 * (p.n - 2) * d.mu);
    rep.flux_margin = p.u_minus / flux_bound;
    rep.flux_small = rep.flux_margin <= 1.0;
    rep.u_margin = std::abs(p.u_minus);
    rep.u_unit = rep.u_margin <= 1.0;
    rep.data_size = std::abs(p.u_minus) + std::abs(p.eta_minus) + std::abs(p.chi_minus);
    return rep;
}

namespace detail {
inline double require(const std::optional<double>& f, const char* name) {
    if (!f) throw ValidationError(std::string("missing field: ") + name);
    if (!std::isfinite(*f)) throw ValidationError(std::string("non-finite field: ") + name);
    return *f;
}
inline void require_positive(double v, const char* cond) {
    if (!(v > 0.0)) throw ValidationError(std::string(cond) + " violated");
}
} // namespace detail

/// Validates a raw record and produces Parameters. A physical sphere
/// radius r0 != 1 is rescaled away here (r -> r/r0 with nu, lambda,
/// kappa divided by r0), so every downstream formula sees r0 = 1.
inline Parameters build_parameters(const ParameterConfig& c) {
    using detail::require;
    using detail::require_positive;

    Parameters p;
    const double n_raw = require(c.n, "n");
    if (n_raw != std::floor(n_raw)) throw ValidationError("n must be an integer");
    if (n_raw < 3.0) throw ValidationError("n >= 3 required");
    p.n = static_cast<int>(n_raw);

    double scale = 1.0;
    if (c.r0) {
        if (!(*c.r0 > 0.0)) throw ValidationError("r0 > 0 violated");
        scale = *c.r0;
    }
    if (c.u_plus && *c.u_plus != 0.0)
        throw ValidationError("far-field velocity must be zero (u_plus != 0 rejected)");

    p.R_gas = require(c.R_gas, "R_gas");
    p.c_V = require(c.c_V, "c_V");
    p.nu = require(c.nu, "nu") / scale;
    p.lambda = require(c.lambda, "lambda") / scale;
    p.kappa = require(c.kappa, "kappa") / scale;
    p.v_plus = require(c.v_plus, "v_plus");
    p.theta_plus = require(c.theta_plus, "theta_plus");
    p.u_minus = require(c.u_minus, "u_minus");

    require_positive(p.R_gas, "R_gas > 0");
    require_positive(p.c_V, "c_V > 0");
    require_positive(p.kappa, "kappa > 0");
    require_positive(p.v_plus, "v_plus > 0");
    require_positive(p.theta_plus, "theta_plus > 0");
    require_positive(p.nu, "nu > 0");
    if (2.0 * p.nu + p.n * p.lambda < 0.0)
        throw ValidationError("2nu + n lambda >= 0 violated");
    require_positive(p.mu(), "mu = 2nu + lambda > 0");

    if (c.eta_minus && c.rho_minus)
        throw ValidationError("give eta_minus or rho_minus, not both");
    if (c.eta_minus) p.eta_minus = require(c.eta_minus, "eta_minus");
    else if (c.rho_minus) {
        const double rm = require(c.rho_minus, "rho_minus");
        require_positive(rm, "rho_minus > 0");
        p.eta_minus = 1.0 / rm - p.v_plus;
    }

    if (c.chi_minus && c.theta_minus)
        throw ValidationError("give chi_minus or theta_minus, not both");
    if (c.chi_minus) p.chi_minus = require(c.chi_minus, "chi_minus");
    else if (c.theta_minus)
        p.chi_minus = require(c.theta_minus, "theta_minus") - p.theta_plus;

    if (!(p.v_minus() > 0.0)) throw ValidationError("v_- = v_+ + eta_- > 0 violated");
    if (!(p.theta_minus() > 0.0)) throw ValidationError("theta_- > 0 violated");

    return p;
}

} // namespace exflow
