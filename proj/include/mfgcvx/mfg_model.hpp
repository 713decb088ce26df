#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfgcvx/calculus.hpp"
#include "mfgcvx/error.hpp"
#include "mfgcvx/grid.hpp"

namespace mfgcvx {

/// Interaction kernel K(x, y): either a constant or a table on the x-nodes.
struct KernelSpec {
    enum class Kind { constant, tabulated };

    Kind kind = Kind::constant;
    double c0 = 1.0;
    std::size_t n = 0;           // table side length (tabulated only)
    std::vector<double> table;   // K(x_i, y_k) at i * n + k

    static KernelSpec constant(double c0) {
        if (!std::isfinite(c0)) throw std::invalid_argument("kernel: constant must be finite");
        KernelSpec k;
        k.c0 = c0;
        return k;
    }

    template <typename Fn>
    static KernelSpec tabulate(const Grid& g, Fn&& fn) {
        KernelSpec k;
        k.kind = Kind::tabulated;
        k.n = g.nx;
        k.table.resize(g.nx * g.nx);
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t l = 0; l < g.nx; ++l) {
                const double v = fn(g.x(i), g.x(l));
                if (!std::isfinite(v)) throw std::invalid_argument("kernel: non-finite table entry");
                k.table[i * g.nx + l] = v;
            }
        return k;
    }

    [[nodiscard]] double operator()(std::size_t i, std::size_t l) const noexcept {
        return kind == Kind::constant ? c0 : table[i * n + l];
    }

    [[nodiscard]] double sup_norm() const {
        if (kind == Kind::constant) return std::abs(c0);
        double s = 0.0;
        for (double v : table) s = std::max(s, std::abs(v));
        return s;
    }
};

/// One instance of the 1-D system
///   u_t + u_xx - r u_x^2 / 2 + int K(x, y) m(y, t) dy + f m = 0,
///   m_t - m_xx - (r m u_x)_x = 0,
/// with zero-flux boundaries and initial slices u0, m0.
struct ProblemSpec {
    Grid grid;
    Field r;
    KernelSpec kernel;
    Field f;
    std::vector<double> u0;
    std::vector<double> m0;
};

inline void validate_problem(const ProblemSpec& p) {
    const Grid& g = p.grid;
    if (!(p.r.grid() == g) || !(p.f.grid() == g)) throw std::invalid_argument("problem: r and f must live on the grid");
    if (p.u0.size() != g.nx || p.m0.size() != g.nx) throw std::invalid_argument("problem: u0 and m0 must have nx entries");
    if (!p.r.all_finite() || !p.f.all_finite()) throw std::invalid_argument("problem: r and f must be finite");
    for (std::size_t i = 0; i < g.nx; ++i) {
        if (!std::isfinite(p.u0[i]) || !std::isfinite(p.m0[i])) throw std::invalid_argument("problem: non-finite initial data");
    }
    if (p.kernel.kind == KernelSpec::Kind::tabulated && p.kernel.n != g.nx) {
        throw std::invalid_argument("problem: tabulated kernel size must equal nx");
    }
}

/// Checks that m0 looks like a probability density: nonnegative with mass
/// within 10% of one.
inline void validate_density(const Grid& g, std::span<const double> m0) {
    for (std::size_t i = 0; i < m0.size(); ++i) {
        if (m0[i] < 0.0) throw std::invalid_argument("density: negative entry at node " + std::to_string(i));
    }
    const double mass = integrate_x(g, m0);
    if (std::abs(mass - 1.0) > 0.1) {
        std::ostringstream msg;
        msg << "density: mass " << mass << " is not within 10% of 1";
        throw std::invalid_argument(msg.str());
    }
}

inline ProblemSpec make_problem(const Grid& g, KernelSpec kernel, std::vector<double> u0, std::vector<double> m0,
                                Field f = {}, double r = -1.0) {
    ProblemSpec p{g, Field(g, r), std::move(kernel), f.size() ? std::move(f) : Field(g), std::move(u0), std::move(m0)};
    validate_problem(p);
    return p;
}

// Kernel term ----------------------------------------------------------------

/// int K(x_i, y) m(y, t_j) dy for every x-node, trapezoid in y.
inline std::vector<double> kernel_term(const Field& m, const KernelSpec& kernel, std::size_t j) {
    const Grid& g = m.grid();
    if (j >= g.nt) throw std::out_of_range("kernel_term: time index out of range");
    const auto w = trapezoid_weights(g.nx, g.dx);
    std::vector<double> out(g.nx, 0.0);
    if (kernel.kind == KernelSpec::Kind::constant) {
        double mass = 0.0;
        for (std::size_t l = 0; l < g.nx; ++l) mass += w[l] * m(l, j);
        std::fill(out.begin(), out.end(), kernel.c0 * mass);
        return out;
    }
    for (std::size_t i = 0; i < g.nx; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < g.nx; ++l) s += kernel(i, l) * w[l] * m(l, j);
        out[i] = s;
    }
    return out;
}

inline Field kernel_term_field(const Field& m, const KernelSpec& kernel) {
    Field out(m.grid());
    for (std::size_t j = 0; j < m.nt(); ++j) {
        const auto col = kernel_term(m, kernel, j);
        std::copy(col.begin(), col.end(), out.slice(j).begin());
    }
    return out;
}

/// Adjoint of kernel_term_field with respect to the Euclidean node product.
inline Field kernel_term_transpose(const Field& a, const KernelSpec& kernel) {
    const Grid& g = a.grid();
    const auto w = trapezoid_weights(g.nx, g.dx);
    Field out(g);
    for (std::size_t j = 0; j < g.nt; ++j)
        for (std::size_t l = 0; l < g.nx; ++l) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.nx; ++i) s += kernel(i, l) * a(i, j);
            out(l, j) = w[l] * s;
        }
    return out;
}

// Residuals ------------------------------------------------------------------

namespace detail {

inline Field hadamard(Field a, const Field& b) {
    for (std::size_t k = 0; k < a.size(); ++k) a.values()[k] *= b.values()[k];
    return a;
}

inline void require_problem_grid(const Field& u, const Field& m, const ProblemSpec& p, const char* who) {
    if (!(u.grid() == p.grid) || !(m.grid() == p.grid)) {
        throw std::invalid_argument(std::string(who) + ": u and m must live on the problem grid");
    }
}

} // namespace detail

/// L1(u, m) = u_t + u_xx - r u_x^2 / 2 + int K m dy + f m.
inline Field residual_l1(const Field& u, const Field& m, const ProblemSpec& p, const Operators& ops) {
    detail::require_problem_grid(u, m, p, "residual_l1");
    Field out = ops.dt.apply(u);
    out += ops.dxx.apply(u);
    const Field ux = ops.dx.apply(u);
    const Field km = kernel_term_field(m, p.kernel);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double r = p.r.values()[k], g = ux.values()[k];
        out.values()[k] += -0.5 * r * g * g + km.values()[k] + p.f.values()[k] * m.values()[k];
    }
    return out;
}

inline Field residual_l1(const Field& u, const Field& m, const ProblemSpec& p) {
    return residual_l1(u, m, p, Operators(p.grid));
}

/// L2(u, m) = m_t - m_xx - (r m u_x)_x. The divergence is taken of the product
/// field; since that flux vanishes at the walls it is reflected oddly there.
inline Field residual_l2(const Field& u, const Field& m, const ProblemSpec& p, const Operators& ops) {
    detail::require_problem_grid(u, m, p, "residual_l2");
    Field out = ops.dt.apply(m);
    out -= ops.dxx.apply(m);
    Field flux = detail::hadamard(detail::hadamard(ops.dx.apply(u), m), p.r);
    out -= ops.div.apply(flux);
    return out;
}

inline Field residual_l2(const Field& u, const Field& m, const ProblemSpec& p) {
    return residual_l2(u, m, p, Operators(p.grid));
}

// Forward Fokker-Planck --------------------------------------------------------

namespace detail {

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
inline void solve_tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                              std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0) throw numerical_error("tridiagonal solve: zero pivot");
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0) throw numerical_error("tridiagonal solve: zero pivot");
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

} // namespace detail

/// Marches m_t = m_xx + (r m u_x)_x forward from m0.
///
/// Diffusion is backward Euler (one tridiagonal solve per step). The drift is
/// explicit in finite-volume form: face fluxes r m (u_{i+1} - u_i) / dx with
/// face-averaged r and m, zero flux through both walls, and half cells at the
/// boundary nodes. Against trapezoid weights both parts telescope, so the
/// discrete mass is conserved to round-off.
inline Field solve_fokker_planck(const Field& u, std::span<const double> m0, const ProblemSpec& p) {
    const Grid& g = p.grid;
    if (!(u.grid() == g)) throw std::invalid_argument("solve_fokker_planck: u must live on the problem grid");
    if (m0.size() != g.nx) throw std::invalid_argument("solve_fokker_planck: m0 must have nx entries");
    if (!u.all_finite()) throw std::invalid_argument("solve_fokker_planck: u has non-finite entries");
    for (double v : m0) {
        if (!std::isfinite(v)) throw std::invalid_argument("solve_fokker_planck: m0 has non-finite entries");
    }
    if (g.nx < 3) throw std::invalid_argument("solve_fokker_planck: need at least 3 x nodes");

    const std::size_t n = g.nx;
    const double dx = g.dx, dt = g.dt;
    const double k = dt / (dx * dx);

    // I - dt * Dxx with the reflected boundary rows.
    std::vector<double> lower(n, -k), diag(n, 1.0 + 2.0 * k), upper(n, -k);
    upper[0] = -2.0 * k;
    lower[n - 1] = -2.0 * k;

    Field m(g);
    std::copy(m0.begin(), m0.end(), m.slice(0).begin());
    std::vector<double> flux(n - 1), rhs(n);
    for (std::size_t j = 0; j + 1 < g.nt; ++j) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double r_face = 0.5 * (p.r(i, j) + p.r(i + 1, j));
            const double m_face = 0.5 * (m(i, j) + m(i + 1, j));
            flux[i] = r_face * m_face * (u(i + 1, j) - u(i, j)) / dx;
        }
        rhs[0] = m(0, j) + dt * flux[0] / (0.5 * dx);
        for (std::size_t i = 1; i + 1 < n; ++i) rhs[i] = m(i, j) + dt * (flux[i] - flux[i - 1]) / dx;
        rhs[n - 1] = m(n - 1, j) - dt * flux[n - 2] / (0.5 * dx);
        detail::solve_tridiagonal(lower, diag, upper, rhs);
        std::copy(rhs.begin(), rhs.end(), m.slice(j + 1).begin());
    }
    if (!m.all_finite()) throw numerical_error("solve_fokker_planck: produced non-finite density");
    return m;
}

// Manufactured solutions -------------------------------------------------------

/// Minimum of m below which the manufactured source is refused.
inline constexpr double kPositivityFloor = 1e-8;

/// f = -(u_t + u_xx - r u_x^2 / 2 + int K m dy) / m, so that residual_l1 with
/// this f vanishes node by node.
inline Field manufactured_f(const Field& u, const Field& m, const KernelSpec& kernel, const Field& r) {
    require_same_grid(u, m, "manufactured_f");
    require_same_grid(u, r, "manufactured_f");
    const auto min_it = std::min_element(m.values().begin(), m.values().end());
    if (*min_it <= kPositivityFloor) {
        std::ostringstream msg;
        msg << "manufactured_f: density touches zero (min " << *min_it << " at flat index "
            << (min_it - m.values().begin()) << ")";
        throw numerical_error(msg.str());
    }
    const Operators ops(u.grid());
    Field bracket = ops.dt.apply(u);
    bracket += ops.dxx.apply(u);
    const Field ux = ops.dx.apply(u);
    const Field km = kernel_term_field(m, kernel);
    Field f(u.grid());
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double g = ux.values()[k];
        const double b = bracket.values()[k] - 0.5 * r.values()[k] * g * g + km.values()[k];
        f.values()[k] = -b / m.values()[k];
    }
    return f;
}

inline Field manufactured_f(const Field& u, const Field& m, const KernelSpec& kernel) {
    return manufactured_f(u, m, kernel, Field(u.grid(), -1.0));
}

/// Constant in the recorded bound C (dt + dx^2) on the Fokker-Planck residual
/// of a manufactured density. Calibrated at grid step 0.1, where the Test 1.1
/// ratio is about 4.8; the start-up layer of backward Euler makes the ratio
/// grow slowly under refinement, so this is not a uniform constant.
inline constexpr double kSchemeMismatchConstant = 6.0;

/// A manufactured ("ideal") instance together with its ground truth.
struct IdealCase {
    Field u_true;
    Field m_true;
    Field f;
    ProblemSpec spec;
    double l1_residual = 0.0;   // ||residual_l1||_{L2(Q_T)} of the truth
    double l2_residual = 0.0;   // ||residual_l2||_{L2(Q_T)} of the truth
    double l2_bound = 0.0;      // kSchemeMismatchConstant * (dt + dx^2)
    std::string source;         // which test produced the case
};

using SpaceTimeFn = std::function<double(double, double)>;
using SpaceFn = std::function<double(double)>;

/// Largest |u_x| at the two walls over all time nodes, by a central difference
/// of the analytic choice.
inline double wall_slope(const SpaceTimeFn& u, const Grid& g) {
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (std::size_t j = 0; j < g.nt; ++j) {
        const double t = g.t(j);
        for (double xb : {g.x_min, g.x_max}) {
            worst = std::max(worst, std::abs((u(xb + h, t) - u(xb - h, t)) / (2.0 * h)));
        }
    }
    return worst;
}

/// Builds the manufactured triple: sample u, march m from m0 under u, then
/// choose f so that the value equation holds exactly on the lattice.
inline IdealCase build_ideal_case(const SpaceTimeFn& u_choice, const SpaceFn& m0_choice, const KernelSpec& kernel,
                                  const Grid& g, std::string source = {}) {
    const double slope = wall_slope(u_choice, g);
    if (slope > 1e-8) {
        std::ostringstream msg;
        msg << "build_ideal_case: u violates the zero-flux condition (|u_x| = " << slope << " at a wall)";
        throw std::invalid_argument(msg.str());
    }
    IdealCase c;
    c.source = std::move(source);
    c.u_true = field_from_fn(g, u_choice);
    auto m0 = sample_x(g, m0_choice);
    ProblemSpec proto = make_problem(g, kernel, slice_at_time(c.u_true, 0), m0);
    c.m_true = solve_fokker_planck(c.u_true, m0, proto);
    c.f = manufactured_f(c.u_true, c.m_true, kernel, proto.r);
    proto.f = c.f;
    c.spec = std::move(proto);

    const Operators ops(g);
    c.l1_residual = norm_l2(residual_l1(c.u_true, c.m_true, c.spec, ops));
    c.l2_residual = norm_l2(residual_l2(c.u_true, c.m_true, c.spec, ops));
    c.l2_bound = kSchemeMismatchConstant * (g.dt + g.dx * g.dx);
    return c;
}

} // namespace mfgcvx
