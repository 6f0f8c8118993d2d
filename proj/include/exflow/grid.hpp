#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "exflow/model.hpp"

namespace exflow {

/// Graded radial mesh on [1, R_max]. Near r = 1 the spacing resolves the
/// kernel e-folding scale layer_width = mu*eps/(n*omega); far out the
/// nodes are log-spaced. A single smooth exponential stretching covers
/// both so finite differences stay second order across the whole mesh.
struct RadialGrid {
    std::vector<double> nodes; // strictly increasing, nodes[0] == 1
    double r_max = 0.0;
    double layer_width = 0.0;  // resolved boundary-layer scale
    std::string grading;       // "layer-exp" or "log"

    std::size_t size() const { return nodes.size(); }
    double operator[](std::size_t i) const { return nodes[i]; }
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Scalar function sampled on a RadialGrid, with an algebraic tail
/// ansatz f(s) ~ f(R_max) (s/R_max)^{-tail_exponent} for s > R_max.
struct SampledField {
    GridPtr grid;
    std::vector<double> values;
    double tail_exponent = 0.0;
    bool tail_valid = false;

    SampledField() = default;
    SampledField(GridPtr g, double fill = 0.0)
        : grid(std::move(g)), values(grid->size(), fill) {}

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    double back() const { return values.back(); }

    void set_tail(double exponent) {
        tail_exponent = exponent;
        tail_valid = true;
    }
};

inline bool same_grid(const SampledField& a, const SampledField& b) {
    return a.grid.get() == b.grid.get();
}

/// Builds the graded mesh. epsilon_scale is the kernel decay estimate
/// (inflow: epsilon; outflow: |u_-|/v_+); it sets the layer width
/// mu*epsilon_scale/(n*omega). At least 16 nodes must land inside
/// [1, 1+10*layer_width] whenever the layer is narrower than
/// (R_max-1)/10; otherwise a plain log-spaced mesh is used.
inline RadialGrid build_grid(const Parameters& p, const DerivedConstants& d,
                             double r_max, std::size_t count, double epsilon_scale) {
    if (!(r_max >= 10.0)) throw ValidationError("R_max >= 10 required");
    if (count < 64) throw ValidationError("insufficient nodes: N >= 64 required");

    RadialGrid g;
    g.r_max = r_max;
    g.layer_width = d.mu * std::abs(epsilon_scale) / (p.n * d.omega);
    g.nodes.resize(count);

    const bool layered = g.layer_width > 0.0 && g.layer_width < (r_max - 1.0) / 10.0;
    if (layered) {
        // r(x) = 1 + w*(e^{sigma x} - 1), x in [0,1]; log-like spacing in (r-1+w)
        const double w = g.layer_width;
        const double sigma = std::log1p((r_max - 1.0) / w);
        for (std::size_t i = 0; i < count; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(count - 1);
            g.nodes[i] = 1.0 + w * std::expm1(sigma * x);
        }
        g.grading = "layer-exp";
        // nodes inside [1, 1+10w]: x up to log(11)/sigma
        const double frac = std::log(11.0) / sigma;
        const std::size_t in_layer =
            static_cast<std::size_t>(frac * static_cast<double>(count - 1)) + 1;
        if (in_layer < 16) {
            const std::size_t needed =
                static_cast<std::size_t>(std::ceil(16.0 / frac)) + 1;
            throw ValidationError("insufficient nodes: boundary layer needs N >= " +
                                  std::to_string(needed));
        }
    } else {
        const double lmax = std::log(r_max);
        for (std::size_t i = 0; i < count; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(count - 1);
            g.nodes[i] = std::exp(lmax * x);
        }
        g.grading = "log";
    }
    g.nodes.front() = 1.0;
    g.nodes.back() = r_max;
    return g;
}

inline GridPtr make_grid(const Parameters& p, const DerivedConstants& d,
                         double r_max, std::size_t count, double epsilon_scale) {
    return std::make_shared<RadialGrid>(build_grid(p, d, r_max, count, epsilon_scale));
}

/// Node index of radius r; throws if r is not a grid node.
inline std::size_t node_index(const RadialGrid& g, double r) {
    auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), r);
    if (it != g.nodes.end() && *it == r)
        return static_cast<std::size_t>(it - g.nodes.begin());
    throw std::domain_error("radius is not a grid node");
}

} // namespace exflow
