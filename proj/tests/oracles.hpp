#pragma once

// Test-only reference integrators, independent of the library's quadrature
// path: adaptive Simpson on finite intervals and an algebraic substitution
// for tails to infinity.

#include <cmath>
#include <functional>

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a, double b,
                            double fa, double fm, double fb, double whole, double tol,
                            int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_step(f, a, b, fa, fm, fb, simpson(f, a, b, fa, fm, fb), tol, 48);
}

// int_r^inf f(s) ds via s = r/x, x in (0, 1]; f must decay algebraically
// faster than 1/s.
inline double integrate_to_infinity(const std::function<double(double)>& f, double r,
                                    double tol = 1e-13) {
    auto sub = [&](double x) {
        if (x <= 0.0) return 0.0;
        const double s = r / x;
        return f(s) * r / (x * x);
    };
    return integrate(sub, 0.0, 1.0, tol);
}

} // namespace oracle
