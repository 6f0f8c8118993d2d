#pragma once

#include <cmath>

#include "exflow/grid.hpp"

namespace exflow {

/// Weighted sup norm sup_r |r^l f(r)| over the grid nodes. When the field
/// carries a valid tail with exponent >= l the tail supremum sits at R_max,
/// which is already a node; a slower tail would dominate the norm beyond
/// the resolved range (see weighted_norm_checked).
inline double weighted_norm(const SampledField& f, double l) {
    double sup = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double w = std::pow((*f.grid)[i], l) * std::abs(f[i]);
        if (w > sup) sup = w;
    }
    return sup;
}

struct WeightedNorm {
    double value = 0.0;
    bool tail_unresolved = false; // tail_valid but tail_exponent < l
};

inline WeightedNorm weighted_norm_checked(const SampledField& f, double l) {
    WeightedNorm r;
    r.value = weighted_norm(f, l);
    r.tail_unresolved = f.tail_valid && f.tail_exponent < l;
    return r;
}

} // namespace exflow
