#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfgcvx/error.hpp"

namespace mfgcvx {

/// Uniform vertex-centred lattice over [x_min, x_max] x [0, t_max].
///
/// Both end points of each axis are nodes, so the t = 0 plane (where the
/// initial data live) is part of the lattice. `gamma` selects the
/// sub-cylinder [x_min, x_max] x [0, gamma * t_max] used by the error norms.
struct Grid {
    double x_min = -1.0;
    double x_max = 1.0;
    double t_max = 1.0;
    double dx = 0.1;
    double dt = 0.1;
    std::size_t nx = 0;
    std::size_t nt = 0;
    double gamma = 0.6;

    /// Node coordinates are always computed from the index, never accumulated.
    [[nodiscard]] double x(std::size_t i) const noexcept { return x_min + static_cast<double>(i) * dx; }
    [[nodiscard]] double t(std::size_t j) const noexcept { return static_cast<double>(j) * dt; }

    [[nodiscard]] std::size_t size() const noexcept { return nx * nt; }

    /// Number of time nodes with t_j <= gamma * t_max.
    [[nodiscard]] std::size_t gamma_count(double g) const noexcept {
        // 0.6 / 0.1 evaluates to 5.999...; nudge before flooring.
        const auto last = static_cast<std::size_t>(std::floor(g * t_max / dt + 1e-9));
        return std::min(last + 1, nt);
    }
    [[nodiscard]] std::size_t gamma_count() const noexcept { return gamma_count(gamma); }

    friend bool operator==(const Grid&, const Grid&) = default;
};

namespace detail {

inline std::size_t node_count(double extent, double step, const char* axis) {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw std::invalid_argument(std::string("grid: step along ") + axis + " must be positive");
    }
    const double ratio = extent / step;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-12 * std::max(1.0, ratio)) {
        std::ostringstream msg;
        msg << "grid: step " << step << " does not divide the " << axis << " extent " << extent;
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(rounded) + 1;
}

} // namespace detail

inline Grid make_grid(double x_min, double x_max, double t_max, double dx, double dt, double gamma = 0.6) {
    if (!(x_min < x_max)) {
        throw std::invalid_argument("grid: x_min must be below x_max");
    }
    if (!(t_max > 0.0)) {
        throw std::invalid_argument("grid: t_max must be positive");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("grid: gamma must lie in (0, 1)");
    }
    Grid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.t_max = t_max;
    g.dx = dx;
    g.dt = dt;
    g.gamma = gamma;
    g.nx = detail::node_count(x_max - x_min, dx, "x");
    g.nt = detail::node_count(t_max, dt, "t");
    return g;
}

/// Scalar samples on a Grid. Storage is time-slice major: node (i, j) lives
/// at j * nx + i, so every time slice is contiguous.
class Field {
public:
    Field() = default;
    explicit Field(const Grid& grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}

    Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw std::invalid_argument("field: value count does not match the grid");
        }
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t nx() const noexcept { return grid_.nx; }
    [[nodiscard]] std::size_t nt() const noexcept { return grid_.nt; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return values_[j * grid_.nx + i]; }
    [[nodiscard]] double& operator()(std::size_t i, std::size_t j) noexcept { return values_[j * grid_.nx + i]; }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }

    [[nodiscard]] std::span<const double> slice(std::size_t j) const noexcept {
        return std::span<const double>(values_).subspan(j * grid_.nx, grid_.nx);
    }
    [[nodiscard]] std::span<double> slice(std::size_t j) noexcept {
        return std::span<double>(values_).subspan(j * grid_.nx, grid_.nx);
    }

    [[nodiscard]] bool all_finite() const noexcept {
        for (double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    Field& operator*=(double s) noexcept {
        for (double& v : values_) v *= s;
        return *this;
    }
    /// this += s * o
    Field& axpy(double s, const Field& o) {
        check_same(o);
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * o.values_[k];
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }

    friend bool operator==(const Field&, const Field&) = default;

private:
    void check_same(const Field& o) const {
        if (!(o.grid_ == grid_)) throw std::invalid_argument("field: grid mismatch");
    }

    Grid grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const Field& a, const Field& b, const char* who) {
    if (!(a.grid() == b.grid())) {
        throw std::invalid_argument(std::string(who) + ": fields live on different grids");
    }
}

/// Samples g(x, t) at every node.
template <typename Fn>
Field field_from_fn(const Grid& grid, Fn&& g) {
    Field f(grid);
    for (std::size_t j = 0; j < grid.nt; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double v = g(grid.x(i), grid.t(j));
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "field_from_fn: non-finite value at node (i=" << i << ", j=" << j << ", x=" << grid.x(i)
                    << ", t=" << grid.t(j) << ")";
                throw std::invalid_argument(msg.str());
            }
            f(i, j) = v;
        }
    }
    return f;
}

/// Samples a function of x alone on the x-nodes.
template <typename Fn>
std::vector<double> sample_x(const Grid& grid, Fn&& g) {
    std::vector<double> out(grid.nx);
    for (std::size_t i = 0; i < grid.nx; ++i) {
        out[i] = g(grid.x(i));
        if (!std::isfinite(out[i])) {
            throw std::invalid_argument("sample_x: non-finite value at node " + std::to_string(i));
        }
    }
    return out;
}

inline std::vector<double> slice_at_time(const Field& field, std::size_t j) {
    if (j >= field.nt()) {
        throw std::out_of_range("slice_at_time: time index " + std::to_string(j) + " out of range");
    }
    const auto s = field.slice(j);
    return {s.begin(), s.end()};
}

/// Copies `column` into every time slice.
inline Field extend_constant_in_time(const Grid& grid, std::span<const double> column) {
    if (column.size() != grid.nx) {
        throw std::invalid_argument("extend_constant_in_time: column length must equal nx");
    }
    Field f(grid);
    for (std::size_t j = 0; j < grid.nt; ++j) {
        std::copy(column.begin(), column.end(), f.slice(j).begin());
    }
    return f;
}

} // namespace mfgcvx
