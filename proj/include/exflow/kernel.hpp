#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace exflow {

/// r^n - s^n in the factored form (r-s) * sum r^k s^{n-1-k}, which keeps
/// full relative accuracy when r is close to s.
inline double power_diff(double r, double s, int n) {
    double acc = 0.0;
    double rk = 1.0;                    // r^k
    double sk = std::pow(s, n - 1);     // s^{n-1-k}
    for (int k = 0; k < n; ++k) {
        acc += rk * sk;
        rk *= r;
        if (k + 1 < n) sk /= s;
    }
    return (r - s) * acc;
}

namespace detail {
constexpr double kExpFlush = -745.0; // below log(min denormal): flush to 0
inline double exp_flush(double x) {
    return x < kExpFlush ? 0.0 : std::exp(x);
}
} // namespace detail

/// Inward-propagating kernel exp(-a (r^n - s^n)), 1 <= s <= r, a > 0.
/// Underflow flushes to exactly zero instead of raising.
inline double kernel_G(double r, double s, int n, double a) {
    if (s > r) throw std::domain_error("kernel_G requires s <= r");
    return detail::exp_flush(-a * power_diff(r, s, n));
}

/// Outward-propagating kernel exp(-b (s^n - r^n)), 1 <= r <= s, b > 0.
inline double kernel_G_tilde(double r, double s, int n, double b) {
    if (s < r) throw std::domain_error("kernel_G_tilde requires s >= r");
    return detail::exp_flush(-b * power_diff(s, r, n));
}

} // namespace exflow
