#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgcvx/grid.hpp"

namespace mfgcvx {

/// Which lattice axis a one-dimensional stencil acts along.
enum class Axis { x, t };

/// A sparse 1-D difference operator: row k holds the (column, weight) pairs
/// producing output node k. Kept explicit so that the transpose used by the
/// gradient is exactly the adjoint of the forward operator.
class Stencil {
public:
    struct Tap {
        std::size_t col;
        double w;
    };

    Stencil(Axis axis, std::size_t n) : axis_(axis), rows_(n) {}

    void add(std::size_t row, std::size_t col, double w) { rows_[row].push_back({col, w}); }

    [[nodiscard]] Axis axis() const noexcept { return axis_; }
    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] const std::vector<Tap>& row(std::size_t k) const { return rows_[k]; }

    /// out = S f along the stencil axis.
    [[nodiscard]] Field apply(const Field& f) const {
        check(f);
        Field out(f.grid());
        const std::size_t nx = f.nx(), nt = f.nt();
        if (axis_ == Axis::x) {
            for (std::size_t j = 0; j < nt; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    double s = 0.0;
                    for (const Tap& tap : rows_[i]) s += tap.w * f(tap.col, j);
                    out(i, j) = s;
                }
        } else {
            for (std::size_t j = 0; j < nt; ++j)
                for (std::size_t i = 0; i < nx; ++i) {
                    double s = 0.0;
                    for (const Tap& tap : rows_[j]) s += tap.w * f(i, tap.col);
                    out(i, j) = s;
                }
        }
        return out;
    }

    /// out = S^T g along the stencil axis.
    [[nodiscard]] Field apply_transpose(const Field& g) const {
        check(g);
        Field out(g.grid());
        const std::size_t nx = g.nx(), nt = g.nt();
        if (axis_ == Axis::x) {
            for (std::size_t j = 0; j < nt; ++j)
                for (std::size_t i = 0; i < nx; ++i)
                    for (const Tap& tap : rows_[i]) out(tap.col, j) += tap.w * g(i, j);
        } else {
            for (std::size_t j = 0; j < nt; ++j)
                for (const Tap& tap : rows_[j])
                    for (std::size_t i = 0; i < nx; ++i) out(i, tap.col) += tap.w * g(i, j);
        }
        return out;
    }

private:
    void check(const Field& f) const {
        const std::size_t n = axis_ == Axis::x ? f.nx() : f.nt();
        if (n != rows_.size()) throw std::invalid_argument("stencil: field does not match stencil length");
    }

    Axis axis_;
    std::vector<std::vector<Tap>> rows_;
};

/// Central second-order d/dt, one-sided second-order at t = 0 and t = T.
inline Stencil make_dt_stencil(const Grid& g) {
    if (g.nt < 3) throw std::invalid_argument("d_dt: need at least 3 time nodes");
    const std::size_t n = g.nt;
    const double h = 1.0 / (2.0 * g.dt);
    Stencil s(Axis::t, n);
    s.add(0, 0, -3.0 * h);
    s.add(0, 1, 4.0 * h);
    s.add(0, 2, -1.0 * h);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        s.add(j, j - 1, -h);
        s.add(j, j + 1, h);
    }
    s.add(n - 1, n - 3, h);
    s.add(n - 1, n - 2, -4.0 * h);
    s.add(n - 1, n - 1, 3.0 * h);
    return s;
}

/// Central d/dx. The zero-flux boundary is imposed by a ghost node mirroring
/// the first interior node, which makes the boundary rows identically zero.
inline Stencil make_dx_stencil(const Grid& g) {
    if (g.nx < 3) throw std::invalid_argument("d_dx: need at least 3 x nodes");
    const std::size_t n = g.nx;
    const double h = 1.0 / (2.0 * g.dx);
    Stencil s(Axis::x, n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        s.add(i, i - 1, -h);
        s.add(i, i + 1, h);
    }
    return s;
}

/// Central d/dx for a flux field that vanishes at the walls (odd ghost
/// reflection, F[-1] = -F[1]): the boundary rows read F[1] / dx and -F[n-2] / dx.
inline Stencil make_div_stencil(const Grid& g) {
    if (g.nx < 3) throw std::invalid_argument("flux divergence: need at least 3 x nodes");
    const std::size_t n = g.nx;
    const double h = 1.0 / (2.0 * g.dx);
    Stencil s(Axis::x, n);
    s.add(0, 1, 2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        s.add(i, i - 1, -h);
        s.add(i, i + 1, h);
    }
    s.add(n - 1, n - 2, -2.0 * h);
    return s;
}

/// Central d2/dx2 with the same ghost reflection: 2 (f[1] - f[0]) / dx^2 at x_min.
inline Stencil make_dxx_stencil(const Grid& g) {
    if (g.nx < 3) throw std::invalid_argument("d2_dx2: need at least 3 x nodes");
    const std::size_t n = g.nx;
    const double h = 1.0 / (g.dx * g.dx);
    Stencil s(Axis::x, n);
    s.add(0, 0, -2.0 * h);
    s.add(0, 1, 2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        s.add(i, i - 1, h);
        s.add(i, i, -2.0 * h);
        s.add(i, i + 1, h);
    }
    s.add(n - 1, n - 2, 2.0 * h);
    s.add(n - 1, n - 1, -2.0 * h);
    return s;
}

/// The stencils every residual needs, built once per grid.
struct Operators {
    explicit Operators(const Grid& g)
        : dt(make_dt_stencil(g)), dx(make_dx_stencil(g)), dxx(make_dxx_stencil(g)), div(make_div_stencil(g)) {}
    Stencil dt;
    Stencil dx;
    Stencil dxx;
    Stencil div;
};

inline Field d_dt(const Field& f) { return make_dt_stencil(f.grid()).apply(f); }
inline Field d_dx(const Field& f) { return make_dx_stencil(f.grid()).apply(f); }
inline Field d2_dx2(const Field& f) { return make_dxx_stencil(f.grid()).apply(f); }
inline Field flux_divergence(const Field& f) { return make_div_stencil(f.grid()).apply(f); }

// Quadrature ---------------------------------------------------------------

/// Trapezoid weights for n nodes spaced h apart.
inline std::vector<double> trapezoid_weights(std::size_t n, double h) {
    std::vector<double> w(n, h);
    if (n > 0) {
        w.front() *= 0.5;
        w.back() *= 0.5;
    }
    if (n == 1) w[0] = 0.0;
    return w;
}

inline double integrate_x(const Grid& g, std::span<const double> values) {
    if (values.size() != g.nx) {
        throw std::invalid_argument("integrate_x: expected " + std::to_string(g.nx) + " values, got " +
                                    std::to_string(values.size()));
    }
    const auto w = trapezoid_weights(g.nx, g.dx);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) s += w[i] * values[i];
    return s;
}

/// Product trapezoid weights over Q_T, laid out like a Field.
inline Field quadrature_weights(const Grid& g) {
    const auto wx = trapezoid_weights(g.nx, g.dx);
    const auto wt = trapezoid_weights(g.nt, g.dt);
    Field w(g);
    for (std::size_t j = 0; j < g.nt; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) w(i, j) = wx[i] * wt[j];
    return w;
}

/// Trapezoid integral of f over Q_T.
inline double integrate(const Field& f) {
    const auto w = quadrature_weights(f.grid());
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += w.values()[k] * f.values()[k];
    return s;
}

inline double norm_l2(const Field& f) {
    const auto w = quadrature_weights(f.grid());
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += w.values()[k] * f.values()[k] * f.values()[k];
    return std::sqrt(s);
}

/// sqrt( int_{Q_gammaT} (f_x^2 + f^2) ), trapezoid over t in [0, t_J] where
/// t_J is the last node not beyond gamma * T.
inline double norm_h10_qgamma(const Field& f, double gamma) {
    const Grid& g = f.grid();
    const std::size_t nj = g.gamma_count(gamma);
    if (nj < 2) return 0.0;
    const Field fx = d_dx(f);
    const auto wx = trapezoid_weights(g.nx, g.dx);
    const auto wt = trapezoid_weights(nj, g.dt);
    double s = 0.0;
    for (std::size_t j = 0; j < nj; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) s += wx[i] * wt[j] * (fx(i, j) * fx(i, j) + f(i, j) * f(i, j));
    return std::sqrt(s);
}

inline double norm_h10_qgamma(const Field& f) { return norm_h10_qgamma(f, f.grid().gamma); }

/// Squared discrete H^2 norm: sum of squared L2(Q_T) norms of f, f_t, f_x, f_xx.
inline double norm_h2_discrete_sq(const Field& f, const Operators& ops) {
    const auto sq = [](double v) { return v * v; };
    return sq(norm_l2(f)) + sq(norm_l2(ops.dt.apply(f))) + sq(norm_l2(ops.dx.apply(f))) +
           sq(norm_l2(ops.dxx.apply(f)));
}

inline double norm_h2_discrete(const Field& f) {
    const Operators ops(f.grid());
    return std::sqrt(norm_h2_discrete_sq(f, ops));
}

/// Gram operator of the discrete H^2 inner product, G f = sum_k D_k^T W D_k f,
/// so that norm_h2_discrete(f)^2 = <f, G f>.
inline Field h2_gram_apply(const Field& f, const Operators& ops, const Field& weights) {
    auto weighted = [&](Field v) {
        for (std::size_t k = 0; k < v.size(); ++k) v.values()[k] *= weights.values()[k];
        return v;
    };
    Field out = weighted(f);
    out += ops.dt.apply_transpose(weighted(ops.dt.apply(f)));
    out += ops.dx.apply_transpose(weighted(ops.dx.apply(f)));
    out += ops.dxx.apply_transpose(weighted(ops.dxx.apply(f)));
    return out;
}

/// Plain Euclidean inner product of node values.
inline double dot(const Field& a, const Field& b) {
    require_same_grid(a, b, "dot");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a.values()[k] * b.values()[k];
    return s;
}

} // namespace mfgcvx
