#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "mfgcvx/carleman.hpp"
#include "mfgcvx/mfg_model.hpp"
#include "mfgcvx/objective.hpp"
#include "mfgcvx/optimizer.hpp"

namespace mfgcvx {

/// The start state of `spec` plus a smooth random perturbation that vanishes
/// on the pinned plane: amplitude * t * sum a_kp cos(k pi (x - x_min) / L) t^p.
inline StatePair random_smooth_state(const ProblemSpec& spec, std::mt19937_64& rng, double amplitude = 0.1) {
    StatePair s = make_start(spec);
    const Grid& g = spec.grid;
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    const double len = g.x_max - g.x_min;
    for (Field* f : {&s.u, &s.m}) {
        double a[4][3];
        for (auto& row : a)
            for (double& v : row) v = coef(rng);
        for (std::size_t j = 0; j < g.nt; ++j) {
            const double t = g.t(j) / g.t_max;
            for (std::size_t i = 0; i < g.nx; ++i) {
                double v = 0.0;
                for (int k = 0; k < 4; ++k) {
                    const double cs = std::cos(k * M_PI * (g.x(i) - g.x_min) / len);
                    v += cs * (a[k][0] + a[k][1] * t + a[k][2] * t * t);
                }
                (*f)(i, j) += amplitude * t * v;
            }
        }
    }
    return project(std::move(s), spec);
}

struct GradientCheck {
    std::size_t states = 0;
    std::size_t directions = 0;
    std::uint64_t seed = 0;
    double max_rel_error = 0.0;
    bool pass = false;  // max_rel_error < 1e-6
};

/// Compares <grad J, v> with a Richardson-extrapolated central difference of
/// J along v for random unit directions v supported off the mask. J is a
/// quartic polynomial in the nodes, so the extrapolated difference is exact up
/// to rounding.
inline GradientCheck check_gradient(const ProblemSpec& spec, const ConvexParams& params, std::size_t states,
                                    std::size_t directions, std::uint64_t seed, double h = 1e-2) {
    if (!(h > 0.0)) throw std::invalid_argument("check_gradient: h must be positive");
    const Objective obj(spec, params);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    GradientCheck out{states, directions, seed, 0.0, false};
    for (std::size_t s = 0; s < states; ++s) {
        const StatePair x = random_smooth_state(spec, rng);
        const StatePair grad = obj.gradient(x);
        for (std::size_t d = 0; d < directions; ++d) {
            StatePair v{Field(spec.grid), Field(spec.grid), x.mask};
            for (std::size_t k = 0; k < v.u.size(); ++k) {
                v.u.values()[k] = normal(rng);
                v.m.values()[k] = normal(rng);
            }
            apply_mask(v);
            const double nv = norm(v);
            v.u *= 1.0 / nv;
            v.m *= 1.0 / nv;
            const auto along = [&](double step) {
                StatePair p = x, q = x;
                axpy(p, step, v);
                axpy(q, -step, v);
                return (obj.eval(p).total - obj.eval(q).total) / (2.0 * step);
            };
            const double fd = (4.0 * along(h / 2.0) - along(h)) / 3.0;
            const double an = dot(grad, v);
            const double rel = std::abs(fd - an) / std::max(std::abs(an), 1e-300);
            out.max_rel_error = std::max(out.max_rel_error, rel);
        }
    }
    out.pass = out.max_rel_error < 1e-6;
    return out;
}

} // namespace mfgcvx
