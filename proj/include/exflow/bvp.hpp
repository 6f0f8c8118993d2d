#pragma once

// Independent verification path: the stationary problem as a two-point BVP on
// the augmented local system (the two nonlocal integrals promoted to state
// variables z and w), discretized with Hermite-Simpson collocation and solved
// by damped Newton with a bordered banded Jacobian. Shares only the pointwise
// F / Phi formulas with the fixed-point module.

#include <array>
#include <cstdio>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <lapacke.h>

#include "exflow/fixed_point.hpp"
#include "exflow/functionals.hpp"
#include "exflow/grid.hpp"
#include "exflow/model.hpp"

namespace exflow {

struct AugmentedState {
    double eta = 0.0;
    double chi = 0.0;
    double z = 0.0; // int_r^inf eta(s)/s^{2n-1} ds
    double w = 0.0; // int_r^inf Phi(s) ds
};

struct BvpUnknowns {
    double alpha = 0.0;
    double eta_at_1 = 0.0; // outflow only; fixes the mass flux
};

struct BvpOptions {
    int max_newton = 60;
    double tol = 1e-12;
    bool verbose = false; // per-iteration trace on stderr
};

struct ComparisonReport {
    double weighted_eta = 0.0;
    double weighted_chi = 0.0;
    double sup_eta = 0.0;
    double sup_chi = 0.0;
    double worst_radius = 1.0;
};

inline double bvp_epsilon(const BvpUnknowns& unk, const Parameters& p) {
    if (classify_regime(p) == FlowRegime::Inflow) return p.u_minus / p.v_minus();
    return p.u_minus / (p.v_plus + unk.eta_at_1);
}

inline AugmentedState augmented_rhs(double r, const AugmentedState& s,
                                    const BvpUnknowns& unk, const Parameters& p,
                                    const DerivedConstants& d) {
    const double eps = bvp_epsilon(unk, p);
    if (eps == 0.0) throw std::domain_error("rhs undefined at eps = 0");
    const double v = p.v_plus + s.eta;
    if (!(v > 0.0)) throw AdmissibilityError("specific volume collapse", r);
    if (!(p.theta_plus + s.chi > 0.0))
        throw AdmissibilityError("temperature collapse", r);
    const int n = p.n;
    const double rn1 = std::pow(r, n - 1);
    const double F = F_pointwise(r, s.eta, s.chi, s.z, p, d, eps);
    const double zeta =
        -p.R_gas * p.theta_plus * rn1 * s.eta / (eps * d.mu * p.v_plus * p.v_plus) +
        p.R_gas * rn1 * s.chi / (eps * d.mu * p.v_plus) + F;
    AugmentedState out;
    out.eta = zeta;
    out.chi = (-unk.alpha + eps * d.c_P * s.chi + s.w) / (p.kappa * rn1) +
              0.5 * eps * eps * eps * v * v / (p.kappa * rn1 * rn1 * rn1) -
              eps * eps * d.mu * v * zeta / (p.kappa * rn1 * rn1);
    out.z = -s.eta / (rn1 * rn1 * r);
    out.w = -Phi_pointwise(r, s.eta, zeta, p, eps);
    return out;
}

namespace detail {

inline std::array<double, 4> to_array(const AugmentedState& s) {
    return {s.eta, s.chi, s.z, s.w};
}
inline AugmentedState from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
}

class BvpProblem {
public:
    BvpProblem(const Parameters& p, const DerivedConstants& d, GridPtr g)
        : p_(p), d_(d), g_(std::move(g)), regime_(classify_regime(p)),
          N_(g_->size()), nb_(regime_ == FlowRegime::Outflow ? 2 : 1) {
        // Row normalization for the eta defects: their Jacobian entries grow
        // like (h L)^2 on stiff far-field intervals, which would put the
        // attainable residual floor far above tol in absolute terms.
        scale_.assign(N_ - 1, 1.0);
        const double eps0 = std::abs(
            regime_ == FlowRegime::Inflow ? p_.u_minus / p_.v_minus()
                                          : p_.u_minus / p_.v_plus);
        for (std::size_t i = 0; i + 1 < N_; ++i) {
            const double h = (*g_)[i + 1] - (*g_)[i];
            const double rn1 = std::pow((*g_)[i + 1], p_.n - 1);
            const double L = p_.R_gas * (p_.theta_plus / p_.v_plus + 1.0) * rn1 /
                             (eps0 * d_.mu * p_.v_plus);
            scale_[i] = 1.0 + h * L + h * h * L * L / 12.0;
        }
    }

    double row_scale(std::size_t interval, int comp) const {
        return comp == 0 ? scale_[interval] : 1.0;
    }

    std::size_t nodes() const { return N_; }
    std::size_t core_size() const { return 4 * N_; }
    int borders() const { return nb_; }
    FlowRegime regime() const { return regime_; }

    AugmentedState node(const std::vector<double>& Y, std::size_t i) const {
        return {Y[4 * i], Y[4 * i + 1], Y[4 * i + 2], Y[4 * i + 3]};
    }

    // Hermite-Simpson defects on interval [r_i, r_{i+1}].
    std::array<double, 4> defect(std::size_t i, const AugmentedState& yi,
                                 const AugmentedState& yj,
                                 const BvpUnknowns& u) const {
        const double ri = (*g_)[i], rj = (*g_)[i + 1], h = rj - ri;
        const auto fi = to_array(augmented_rhs(ri, yi, u, p_, d_));
        const auto fj = to_array(augmented_rhs(rj, yj, u, p_, d_));
        const auto ai = to_array(yi), aj = to_array(yj);
        std::array<double, 4> am;
        for (int c = 0; c < 4; ++c)
            am[c] = 0.5 * (ai[c] + aj[c]) + h * (fi[c] - fj[c]) / 8.0;
        const auto fm =
            to_array(augmented_rhs(0.5 * (ri + rj), from_array(am), u, p_, d_));
        std::array<double, 4> def;
        for (int c = 0; c < 4; ++c)
            def[c] = aj[c] - ai[c] - h / 6.0 * (fi[c] + 4.0 * fm[c] + fj[c]);
        return def;
    }

    using Mat4 = std::array<std::array<double, 4>, 4>; // [row][col]

    // 4x4 Jacobian of the rhs at a fixed point in state space. Differencing
    // the rhs directly avoids the midpoint amplification that makes naive
    // differencing of the whole defect useless on stiff far-field intervals.
    Mat4 f_jacobian(double r, const AugmentedState& y, const BvpUnknowns& u) const {
        Mat4 J{};
        for (int c = 0; c < 4; ++c) {
            const double delta = fd_step(c);
            auto yp = to_array(y), ym = to_array(y);
            yp[static_cast<std::size_t>(c)] += delta;
            ym[static_cast<std::size_t>(c)] -= delta;
            const auto fp = to_array(augmented_rhs(r, from_array(yp), u, p_, d_));
            const auto fm = to_array(augmented_rhs(r, from_array(ym), u, p_, d_));
            for (int rr = 0; rr < 4; ++rr)
                J[static_cast<std::size_t>(rr)][static_cast<std::size_t>(c)] =
                    (fp[static_cast<std::size_t>(rr)] -
                     fm[static_cast<std::size_t>(rr)]) /
                    (2.0 * delta);
        }
        return J;
    }

    std::array<double, 4> f_border(double r, const AugmentedState& y,
                                   const BvpUnknowns& u, int b) const {
        const double delta = 1e-9;
        BvpUnknowns up = u, um = u;
        (b == 0 ? up.alpha : up.eta_at_1) += delta;
        (b == 0 ? um.alpha : um.eta_at_1) -= delta;
        const auto fp = to_array(augmented_rhs(r, y, up, p_, d_));
        const auto fm = to_array(augmented_rhs(r, y, um, p_, d_));
        std::array<double, 4> out;
        for (int c = 0; c < 4; ++c)
            out[static_cast<std::size_t>(c)] =
                (fp[static_cast<std::size_t>(c)] -
                 fm[static_cast<std::size_t>(c)]) /
                (2.0 * delta);
        return out;
    }

    struct IntervalJac {
        std::array<double, 4> def{};
        Mat4 d_yi{}, d_yj{};
        std::array<std::array<double, 4>, 2> d_b{};
    };

    // Defect plus its derivatives, with the Hermite midpoint chained
    // analytically: d(def)/dy = +-I - h/6 (J_end + 4 J_m dym/dy),
    // dym/dy_i = I/2 + (h/8) J_i, dym/dy_j = I/2 - (h/8) J_j.
    IntervalJac interval_jacobian(std::size_t i, const AugmentedState& yi,
                                  const AugmentedState& yj, const BvpUnknowns& u,
                                  int nb) const {
        const double ri = (*g_)[i], rj = (*g_)[i + 1], h = rj - ri;
        const double rm = 0.5 * (ri + rj);
        const auto fi = to_array(augmented_rhs(ri, yi, u, p_, d_));
        const auto fj = to_array(augmented_rhs(rj, yj, u, p_, d_));
        const auto ai = to_array(yi), aj = to_array(yj);
        std::array<double, 4> am;
        for (int c = 0; c < 4; ++c)
            am[static_cast<std::size_t>(c)] =
                0.5 * (ai[static_cast<std::size_t>(c)] +
                       aj[static_cast<std::size_t>(c)]) +
                h * (fi[static_cast<std::size_t>(c)] -
                     fj[static_cast<std::size_t>(c)]) /
                    8.0;
        const AugmentedState ym = from_array(am);
        const auto fm = to_array(augmented_rhs(rm, ym, u, p_, d_));

        const Mat4 Ji = f_jacobian(ri, yi, u);
        const Mat4 Jj = f_jacobian(rj, yj, u);
        const Mat4 Jm = f_jacobian(rm, ym, u);

        IntervalJac out;
        for (int c = 0; c < 4; ++c)
            out.def[static_cast<std::size_t>(c)] =
                aj[static_cast<std::size_t>(c)] -
                ai[static_cast<std::size_t>(c)] -
                h / 6.0 *
                    (fi[static_cast<std::size_t>(c)] +
                     4.0 * fm[static_cast<std::size_t>(c)] +
                     fj[static_cast<std::size_t>(c)]);
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                double jm_mi = 0.0, jm_mj = 0.0; // (Jm * dym/dy)_rc
                for (std::size_t k = 0; k < 4; ++k) {
                    const double mi =
                        (k == c ? 0.5 : 0.0) + h / 8.0 * Ji[k][c];
                    const double mj =
                        (k == c ? 0.5 : 0.0) - h / 8.0 * Jj[k][c];
                    jm_mi += Jm[r][k] * mi;
                    jm_mj += Jm[r][k] * mj;
                }
                out.d_yi[r][c] = (r == c ? -1.0 : 0.0) -
                                 h / 6.0 * (Ji[r][c] + 4.0 * jm_mi);
                out.d_yj[r][c] = (r == c ? 1.0 : 0.0) -
                                 h / 6.0 * (Jj[r][c] + 4.0 * jm_mj);
            }
        }
        for (int b = 0; b < nb; ++b) {
            const auto fib = f_border(ri, yi, u, b);
            const auto fjb = f_border(rj, yj, u, b);
            const auto fmb = f_border(rm, ym, u, b);
            for (std::size_t r = 0; r < 4; ++r) {
                double dfm = fmb[r];
                for (std::size_t k = 0; k < 4; ++k)
                    dfm += Jm[r][k] * h / 8.0 * (fib[k] - fjb[k]);
                out.d_b[static_cast<std::size_t>(b)][r] =
                    -h / 6.0 * (fib[r] + 4.0 * dfm + fjb[r]);
            }
        }
        return out;
    }

    // algebraic tail closures at R_max, from the leading power-law behavior
    double z_closure(double eta_R) const {
        const int n = p_.n;
        const double R = g_->r_max;
        return eta_R * std::pow(R, -(2.0 * n - 2.0)) / (3.0 * n - 4.0);
    }
    double w_closure(double eta_R, const BvpUnknowns& u) const {
        const int n = p_.n;
        const double R = g_->r_max;
        const double eps = bvp_epsilon(u, p_);
        const double v = p_.v_plus + eta_R;
        return (2.0 * eps * eps * p_.nu * (n - 1) * v * v +
                2.0 * eps * eps * p_.nu * (n - 2) * p_.v_plus * eta_R) *
               std::pow(R, -n);
    }
    double chi_closure(double eta_R, double w_R, const BvpUnknowns& u) const {
        const int n = p_.n;
        const double R = g_->r_max;
        const double eps = bvp_epsilon(u, p_);
        const double lead =
            u.alpha * std::pow(R, -(n - 2.0)) / (p_.kappa * (n - 2));
        const double t1 = eps * d_.c_P * u.alpha * std::pow(R, -(2.0 * n - 4.0)) /
                          (p_.kappa * (n - 2) * (2.0 * n - 4.0));
        const double t2 = 0.5 * eps * eps * eps * p_.v_plus * p_.v_plus *
                          std::pow(R, -(3.0 * n - 4.0)) / (3.0 * n - 4.0);
        const double t3 = eps * eps * d_.mu * p_.v_plus * (n - 2) * eta_R *
                          std::pow(R, -(2.0 * n - 2.0)) / (3.0 * n - 4.0);
        const double t4 = w_R * std::pow(R, -(n - 2.0)) / (2.0 * n - 2.0);
        return lead - (t1 + t2 + t3 + t4) / p_.kappa;
    }
    // outflow: pins eta(R_max) to the decaying branch of the eta equation
    double slow_manifold(const AugmentedState& yR, const BvpUnknowns& u) const {
        const double R = g_->r_max;
        return augmented_rhs(R, yR, u, p_, d_).eta + (p_.n - 2) * yR.eta / R;
    }

    void residual(const std::vector<double>& Y, const BvpUnknowns& u,
                  std::vector<double>& core, std::array<double, 2>& bord) const {
        core.assign(core_size(), 0.0);
        const std::size_t off = left_rows();
        if (regime_ == FlowRegime::Inflow) {
            core[0] = Y[0] - p_.eta_minus;
            core[1] = Y[1] - p_.chi_minus;
        } else {
            core[0] = Y[1] - p_.chi_minus;
        }
        for (std::size_t i = 0; i + 1 < N_; ++i) {
            const auto def = defect(i, node(Y, i), node(Y, i + 1), u);
            for (int c = 0; c < 4; ++c)
                core[off + 4 * i + c] = def[c] / row_scale(i, c);
        }
        const AugmentedState yR = node(Y, N_ - 1);
        if (regime_ == FlowRegime::Inflow) {
            core[core_size() - 2] = yR.z - z_closure(yR.eta);
            core[core_size() - 1] = yR.w - w_closure(yR.eta, u);
            bord[0] = yR.chi - chi_closure(yR.eta, yR.w, u);
        } else {
            core[core_size() - 3] = yR.z - z_closure(yR.eta);
            core[core_size() - 2] = yR.w - w_closure(yR.eta, u);
            core[core_size() - 1] = slow_manifold(yR, u);
            bord[0] = yR.chi - chi_closure(yR.eta, yR.w, u);
            bord[1] = u.eta_at_1 - Y[0];
        }
    }

    std::size_t left_rows() const {
        return regime_ == FlowRegime::Inflow ? 2 : 1;
    }

    static double fd_step(int comp) {
        static constexpr std::array<double, 4> steps = {1e-9, 1e-9, 1e-11, 1e-11};
        return steps[static_cast<std::size_t>(comp)];
    }

private:
    const Parameters& p_;
    const DerivedConstants& d_;
    GridPtr g_;
    FlowRegime regime_;
    std::size_t N_;
    int nb_;
    std::vector<double> scale_;
};

inline double residual_norm(const std::vector<double>& core,
                            const std::array<double, 2>& bord, int nb) {
    double m = 0.0;
    for (double v : core) m = std::max(m, std::abs(v));
    for (int b = 0; b < nb; ++b) m = std::max(m, std::abs(bord[b]));
    return m;
}

} // namespace detail

/// Damped Newton on the collocation system. Unknowns: 4 states per node plus
/// alpha (and eta(1) for outflow) handled as bordered columns of the banded
/// Jacobian. An optional initial guess warm-starts the iteration.
inline StationarySolution solve_bvp(const Parameters& p, const DerivedConstants& d,
                                    const GridPtr& g,
                                    const StationarySolution* init = nullptr,
                                    const BvpOptions& options = {}) {
    const FlowRegime regime = classify_regime(p);
    if (regime == FlowRegime::Impermeable)
        throw std::domain_error("impermeable regime has a closed form");

    detail::BvpProblem prob(p, d, g);
    const std::size_t N = prob.nodes();
    const std::size_t m = prob.core_size();
    const int nb = prob.borders();
    const int n = p.n;

    std::vector<double> Y(m, 0.0);
    BvpUnknowns unk;
    unk.alpha = p.kappa * (n - 2) * p.chi_minus;
    if (init) {
        const SampledField& e = init->state.eta;
        const SampledField z = cumulative_tail_integrals(e, 2.0 * n - 1.0);
        const SampledField phi =
            Phi_dissipation(e, init->state.zeta, p, init->state.epsilon);
        const SampledField w = cumulative_tail_integrals(phi, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            Y[4 * i] = e[i];
            Y[4 * i + 1] = init->state.chi[i];
            Y[4 * i + 2] = z[i];
            Y[4 * i + 3] = w[i];
        }
        unk.alpha = init->state.alpha;
        unk.eta_at_1 = e[0];
    } else if (regime == FlowRegime::Inflow) {
        Y[0] = p.eta_minus;
        Y[1] = p.chi_minus;
    }

    StationarySolution sol;
    sol.outside_smallness = !smallness_check(p).all();

    std::vector<double> core;
    std::array<double, 2> bord{0.0, 0.0};
    auto eval_norm = [&](const std::vector<double>& Yt, const BvpUnknowns& ut,
                         std::vector<double>& ct, std::array<double, 2>& bt) {
        try {
            prob.residual(Yt, ut, ct, bt);
        } catch (const AdmissibilityError&) {
            return std::numeric_limits<double>::infinity();
        }
        return detail::residual_norm(ct, bt, nb);
    };

    double rnorm = eval_norm(Y, unk, core, bord);
    if (!std::isfinite(rnorm)) {
        sol.diagnostic = "initial guess outside admissible set";
        return sol;
    }

    const int kl = 7, ku = 7, ldab = 2 * kl + ku + 1;
    std::vector<double> ab, rhs, Bcols, C, D;
    std::vector<lapack_int> ipiv(m);
    const std::size_t off = prob.left_rows();

    int it = 0;
    for (; it < options.max_newton && rnorm > options.tol; ++it) {
        if (options.verbose) {
            std::size_t amax = 0;
            for (std::size_t i = 0; i < m; ++i)
                if (std::abs(core[i]) > std::abs(core[amax])) amax = i;
            std::fprintf(stderr,
                         "  newton %d worst core row %zu (%.3e), border %.3e %.3e\n",
                         it, amax, core[amax], bord[0], bord[1]);
        }
        ab.assign(static_cast<std::size_t>(ldab) * m, 0.0);
        Bcols.assign(m * static_cast<std::size_t>(nb), 0.0);
        C.assign(static_cast<std::size_t>(nb) * m, 0.0);
        D.assign(static_cast<std::size_t>(nb) * nb, 0.0);
        auto add = [&](std::size_t row, std::size_t col, double val) {
            ab[col * static_cast<std::size_t>(ldab) + kl + ku + row - col] = val;
        };

        // left boundary rows are linear
        if (regime == FlowRegime::Inflow) {
            add(0, 0, 1.0);
            add(1, 1, 1.0);
        } else {
            add(0, 1, 1.0);
        }

        auto perturb_unk = [&](const BvpUnknowns& u, int b, double delta) {
            BvpUnknowns up = u;
            (b == 0 ? up.alpha : up.eta_at_1) += delta;
            return up;
        };

        // collocation block rows
        for (std::size_t i = 0; i + 1 < N; ++i) {
            const auto ij = prob.interval_jacobian(i, prob.node(Y, i),
                                                   prob.node(Y, i + 1), unk, nb);
            for (std::size_t rr = 0; rr < 4; ++rr) {
                const std::size_t row = off + 4 * i + rr;
                const double sc = prob.row_scale(i, static_cast<int>(rr));
                for (std::size_t cc = 0; cc < 4; ++cc) {
                    add(row, 4 * i + cc, ij.d_yi[rr][cc] / sc);
                    add(row, 4 * (i + 1) + cc, ij.d_yj[rr][cc] / sc);
                }
                for (int b = 0; b < nb; ++b)
                    Bcols[b * m + row] =
                        ij.d_b[static_cast<std::size_t>(b)][rr] / sc;
            }
        }

        // right closures and border rows, finite differences on the last node
        {
            const std::size_t last = 4 * (N - 1);
            auto right_res = [&](const AugmentedState& yR, const BvpUnknowns& u) {
                std::array<double, 4> out{};
                out[0] = yR.z - prob.z_closure(yR.eta);
                out[1] = yR.w - prob.w_closure(yR.eta, u);
                out[2] = yR.chi - prob.chi_closure(yR.eta, yR.w, u);
                out[3] = (regime == FlowRegime::Outflow)
                             ? prob.slow_manifold(yR, u)
                             : 0.0;
                return out;
            };
            const AugmentedState yR = prob.node(Y, N - 1);
            std::array<std::size_t, 3> rows{};
            if (regime == FlowRegime::Inflow)
                rows = {m - 2, m - 1, 0};
            else
                rows = {m - 3, m - 2, m - 1};
            for (int c = 0; c < 4; ++c) {
                const double delta = detail::BvpProblem::fd_step(c);
                AugmentedState yp = yR, ym2 = yR;
                auto bump = [&](AugmentedState& s, double dv) {
                    if (c == 0) s.eta += dv;
                    else if (c == 1) s.chi += dv;
                    else if (c == 2) s.z += dv;
                    else s.w += dv;
                };
                bump(yp, delta);
                bump(ym2, -delta);
                const auto rp = right_res(yp, unk);
                const auto rm = right_res(ym2, unk);
                const std::size_t col = last + c;
                add(rows[0], col, (rp[0] - rm[0]) / (2.0 * delta));
                add(rows[1], col, (rp[1] - rm[1]) / (2.0 * delta));
                if (regime == FlowRegime::Outflow)
                    add(rows[2], col, (rp[3] - rm[3]) / (2.0 * delta));
                C[col] += (rp[2] - rm[2]) / (2.0 * delta); // chi-closure row
            }
            for (int b = 0; b < nb; ++b) {
                const double delta = 1e-9;
                const auto rp = right_res(yR, perturb_unk(unk, b, delta));
                const auto rm = right_res(yR, perturb_unk(unk, b, -delta));
                Bcols[b * m + rows[0]] = (rp[0] - rm[0]) / (2.0 * delta);
                Bcols[b * m + rows[1]] = (rp[1] - rm[1]) / (2.0 * delta);
                if (regime == FlowRegime::Outflow)
                    Bcols[b * m + rows[2]] = (rp[3] - rm[3]) / (2.0 * delta);
                // chi-closure border row, derivative w.r.t. border unknown b
                D[static_cast<std::size_t>(b) * nb] =
                    (rp[2] - rm[2]) / (2.0 * delta);
            }
            if (regime == FlowRegime::Outflow) {
                // q - eta(1) = 0 row: depends on q and on eta at the wall only
                C[m + 0] = -1.0;
                D[0 * nb + 1] = 0.0;
                D[1 * nb + 1] = 1.0;
            }
        }

        // factor and bordered solve: J = [[A, B], [C, D]]
        lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, static_cast<lapack_int>(m),
                                         static_cast<lapack_int>(m), kl, ku,
                                         ab.data(), ldab, ipiv.data());
        if (info != 0) {
            sol.diagnostic = "jacobian factorization failed (info=" +
                             std::to_string(info) + ")";
            break;
        }
        rhs.assign(m * static_cast<std::size_t>(nb + 1), 0.0);
        for (int b = 0; b < nb; ++b)
            for (std::size_t i = 0; i < m; ++i) rhs[b * m + i] = Bcols[b * m + i];
        for (std::size_t i = 0; i < m; ++i) rhs[nb * m + i] = -core[i];
        info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(m),
                              kl, ku, nb + 1, ab.data(), ldab, ipiv.data(),
                              rhs.data(), static_cast<lapack_int>(m));
        if (info != 0) {
            sol.diagnostic = "banded solve failed";
            break;
        }
        // Schur complement over the border unknowns
        std::array<double, 4> S{};
        std::array<double, 2> t{};
        for (int rb = 0; rb < nb; ++rb) {
            t[rb] = -bord[rb];
            for (std::size_t i = 0; i < m; ++i) {
                if (C[rb * m + i] == 0.0) continue;
                t[rb] -= C[rb * m + i] * rhs[nb * m + i];
            }
            for (int cb = 0; cb < nb; ++cb) {
                double s = D[static_cast<std::size_t>(cb) * nb + rb];
                for (std::size_t i = 0; i < m; ++i) {
                    if (C[rb * m + i] == 0.0) continue;
                    s -= C[rb * m + i] * rhs[cb * m + i];
                }
                S[cb * 2 + rb] = s;
            }
        }
        std::array<double, 2> db{0.0, 0.0};
        if (nb == 1) {
            if (S[0] == 0.0) {
                sol.diagnostic = "singular border block";
                break;
            }
            db[0] = t[0] / S[0];
        } else {
            const double det = S[0] * S[3] - S[2] * S[1];
            if (det == 0.0) {
                sol.diagnostic = "singular border block";
                break;
            }
            db[0] = (t[0] * S[3] - S[2] * t[1]) / det;
            db[1] = (S[0] * t[1] - t[0] * S[1]) / det;
        }
        std::vector<double> dY(m);
        for (std::size_t i = 0; i < m; ++i) {
            double v = rhs[nb * m + i];
            for (int b = 0; b < nb; ++b) v -= rhs[b * m + i] * db[b];
            dY[i] = v;
        }

        // line search: halve until the residual decreases, floor 2^-10
        double lambda = 1.0;
        bool accepted = false;
        std::vector<double> Yt(m), ct;
        std::array<double, 2> bt{};
        BvpUnknowns ut;
        for (int half = 0; half <= 10; ++half, lambda *= 0.5) {
            for (std::size_t i = 0; i < m; ++i) Yt[i] = Y[i] + lambda * dY[i];
            ut = unk;
            ut.alpha += lambda * db[0];
            if (nb == 2) ut.eta_at_1 += lambda * db[1];
            const double rt = eval_norm(Yt, ut, ct, bt);
            if (options.verbose)
                std::fprintf(stderr,
                             "  newton %d lambda %.3e residual %.3e -> %.3e\n",
                             it, lambda, rnorm, rt);
            if (rt < rnorm) {
                Y.swap(Yt);
                unk = ut;
                core.swap(ct);
                bord = bt;
                rnorm = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            sol.diagnostic = "line search stalled at damping floor";
            ++it;
            break;
        }
    }

    sol.iterations = it;
    sol.final_increment = rnorm;
    sol.fixed_point_residual = rnorm;
    sol.converged = rnorm <= options.tol;
    if (!sol.converged && sol.diagnostic.empty())
        sol.diagnostic = "newton did not converge (residual " +
                         std::to_string(rnorm) + ")";

    sol.state.eta = SampledField(g);
    sol.state.chi = SampledField(g);
    sol.state.zeta = SampledField(g);
    const double eps = bvp_epsilon(unk, p);
    for (std::size_t i = 0; i < N; ++i) {
        sol.state.eta[i] = Y[4 * i];
        sol.state.chi[i] = Y[4 * i + 1];
        sol.state.zeta[i] =
            augmented_rhs((*g)[i], prob.node(Y, i), unk, p, d).eta;
    }
    sol.state.eta.set_tail(static_cast<double>(n - 2));
    sol.state.chi.set_tail(static_cast<double>(n - 2));
    sol.state.alpha = unk.alpha;
    sol.state.epsilon = eps;
    sol.state.m = it;
    return sol;
}

inline ComparisonReport compare_solutions(const StationarySolution& a,
                                          const StationarySolution& b, double l) {
    if (!same_grid(a.state.eta, b.state.eta))
        throw std::domain_error("grid mismatch");
    const GridPtr g = a.state.eta.grid;
    ComparisonReport rep;
    double worst = -1.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double r = (*g)[i];
        const double wgt = std::pow(r, l);
        const double de = std::abs(a.state.eta[i] - b.state.eta[i]);
        const double dc = std::abs(a.state.chi[i] - b.state.chi[i]);
        rep.weighted_eta = std::max(rep.weighted_eta, wgt * de);
        rep.weighted_chi = std::max(rep.weighted_chi, wgt * dc);
        rep.sup_eta = std::max(rep.sup_eta, de);
        rep.sup_chi = std::max(rep.sup_chi, dc);
        const double local = std::max(wgt * de, wgt * dc);
        if (local > worst) {
            worst = local;
            rep.worst_radius = r;
        }
    }
    return rep;
}

} // namespace exflow
