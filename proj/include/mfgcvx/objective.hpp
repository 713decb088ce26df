#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgcvx/calculus.hpp"
#include "mfgcvx/carleman.hpp"
#include "mfgcvx/error.hpp"
#include "mfgcvx/grid.hpp"
#include "mfgcvx/mfg_model.hpp"

namespace mfgcvx {

/// The unknown pair (u, m). `mask` marks nodes whose values are pinned to the
/// initial data (the whole t = 0 plane); it is shared by both fields.
struct StatePair {
    Field u;
    Field m;
    std::vector<unsigned char> mask;

    [[nodiscard]] const Grid& grid() const noexcept { return u.grid(); }

    friend bool operator==(const StatePair&, const StatePair&) = default;
};

inline std::vector<unsigned char> initial_plane_mask(const Grid& g) {
    std::vector<unsigned char> mask(g.size(), 0);
    for (std::size_t i = 0; i < g.nx; ++i) mask[i] = 1;
    return mask;
}

inline double dot(const StatePair& a, const StatePair& b) { return dot(a.u, b.u) + dot(a.m, b.m); }
inline double norm(const StatePair& a) { return std::sqrt(dot(a, a)); }

/// a += s * b
inline void axpy(StatePair& a, double s, const StatePair& b) {
    a.u.axpy(s, b.u);
    a.m.axpy(s, b.m);
}

/// Zeroes masked entries.
inline void apply_mask(StatePair& s) {
    for (std::size_t k = 0; k < s.mask.size(); ++k) {
        if (s.mask[k]) {
            s.u.values()[k] = 0.0;
            s.m.values()[k] = 0.0;
        }
    }
}

/// Discrete H^2 norm of the pair, (|u|^2 + |m|^2)^(1/2).
inline double norm_h2_pair(const StatePair& s) {
    const Operators ops(s.grid());
    return std::sqrt(norm_h2_discrete_sq(s.u, ops) + norm_h2_discrete_sq(s.m, ops));
}

struct ObjectiveBreakdown {
    double j1 = 0.0;  // weighted value-equation residual
    double j2 = 0.0;  // weighted density-equation residual
    double j3 = 0.0;  // regularisation
    double total = 0.0;
};

/// J(u, m) = balance int (L1^2 + q d L2^2) phi^2 + alpha (|u|_H2^2 + |m|_H2^2)
/// on a fixed problem, with everything that does not depend on the state
/// precomputed. The gradient is the exact derivative of the discrete value.
class Objective {
public:
    Objective(const ProblemSpec& spec, const ConvexParams& params)
        : spec_(spec), params_(params), ops_(spec.grid), w_(quadrature_weights(spec.grid)), ww_(spec.grid) {
        const Grid& g = spec.grid;
        qd_ = params.q(g.t_max) * params.d;
        for (std::size_t j = 0; j < g.nt; ++j) {
            const double wt = params.residual_weight(g.t(j), g.t_max);
            if (!std::isfinite(wt)) throw numerical_error("objective: Carleman weight overflows at t = " + std::to_string(g.t(j)));
            for (std::size_t i = 0; i < g.nx; ++i) ww_(i, j) = w_(i, j) * wt;
        }
    }

    [[nodiscard]] const ProblemSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const ConvexParams& params() const noexcept { return params_; }
    [[nodiscard]] const Operators& ops() const noexcept { return ops_; }

    [[nodiscard]] ObjectiveBreakdown eval(const StatePair& s) const {
        check(s);
        const Field l1 = residual_l1(s.u, s.m, spec_, ops_);
        const Field l2 = residual_l2(s.u, s.m, spec_, ops_);
        ObjectiveBreakdown b;
        for (std::size_t k = 0; k < l1.size(); ++k) {
            const double w = ww_.values()[k];
            b.j1 += w * l1.values()[k] * l1.values()[k];
            b.j2 += w * l2.values()[k] * l2.values()[k];
        }
        b.j2 *= qd_;
        b.j3 = params_.alpha * (h2_sq(s.u) + h2_sq(s.m));
        require_finite(b.j1, "j1 (value-equation residual)");
        require_finite(b.j2, "j2 (density-equation residual)");
        require_finite(b.j3, "j3 (regularisation)");
        b.total = b.j1 + b.j2 + b.j3;
        return b;
    }

    /// Gradient with respect to every node value, masked entries zeroed.
    [[nodiscard]] StatePair gradient(const StatePair& s) const {
        check(s);
        const Field& r = spec_.r;
        const Field ux = ops_.dx.apply(s.u);
        const Field l1 = residual_l1(s.u, s.m, spec_, ops_);
        const Field l2 = residual_l2(s.u, s.m, spec_, ops_);

        // Residuals scaled by their quadrature/Carleman weights: the adjoint seeds.
        Field a1(l1.grid()), a2(l2.grid());
        for (std::size_t k = 0; k < a1.size(); ++k) {
            a1.values()[k] = 2.0 * ww_.values()[k] * l1.values()[k];
            a2.values()[k] = 2.0 * qd_ * ww_.values()[k] * l2.values()[k];
        }

        // Value equation: u_t + u_xx - r u_x^2 / 2 + K m + f m.
        Field gu = ops_.dt.apply_transpose(a1);
        gu += ops_.dxx.apply_transpose(a1);
        Field tmp(a1.grid());
        for (std::size_t k = 0; k < tmp.size(); ++k) tmp.values()[k] = r.values()[k] * ux.values()[k] * a1.values()[k];
        gu -= ops_.dx.apply_transpose(tmp);
        Field gm = kernel_term_transpose(a1, spec_.kernel);
        for (std::size_t k = 0; k < gm.size(); ++k) gm.values()[k] += spec_.f.values()[k] * a1.values()[k];

        // Density equation: m_t - m_xx - (r m u_x)_x.
        gm += ops_.dt.apply_transpose(a2);
        gm -= ops_.dxx.apply_transpose(a2);
        const Field dxt_a2 = ops_.div.apply_transpose(a2);
        for (std::size_t k = 0; k < gm.size(); ++k) {
            gm.values()[k] -= r.values()[k] * ux.values()[k] * dxt_a2.values()[k];
            tmp.values()[k] = r.values()[k] * s.m.values()[k] * dxt_a2.values()[k];
        }
        gu -= ops_.dx.apply_transpose(tmp);

        // Regulariser.
        gu.axpy(2.0 * params_.alpha, h2_gram_apply(s.u, ops_, w_));
        gm.axpy(2.0 * params_.alpha, h2_gram_apply(s.m, ops_, w_));

        StatePair out{std::move(gu), std::move(gm), s.mask};
        apply_mask(out);
        if (!out.u.all_finite() || !out.m.all_finite()) throw numerical_error("objective: non-finite gradient");
        return out;
    }

private:
    void check(const StatePair& s) const {
        if (!(s.u.grid() == spec_.grid) || !(s.m.grid() == spec_.grid)) {
            throw std::invalid_argument("objective: state does not live on the problem grid");
        }
        if (s.mask.size() != spec_.grid.size()) throw std::invalid_argument("objective: mask has the wrong size");
    }

    [[nodiscard]] double h2_sq(const Field& f) const { return norm_h2_discrete_sq(f, ops_); }

    static void require_finite(double v, const char* term) {
        if (!std::isfinite(v)) throw numerical_error(std::string("objective: non-finite ") + term);
    }

    ProblemSpec spec_;
    ConvexParams params_;
    Operators ops_;
    Field w_;   // trapezoid weights over Q_T
    Field ww_;  // trapezoid weights times balance * phi^2
    double qd_ = 0.0;
};

inline ObjectiveBreakdown eval_j(const StatePair& s, const ConvexParams& params, const ProblemSpec& spec) {
    return Objective(spec, params).eval(s);
}

inline StatePair grad_j(const StatePair& s, const ConvexParams& params, const ProblemSpec& spec) {
    return Objective(spec, params).gradient(s);
}

/// |masked grad_now| / |grad_start|.
inline double first_order_optimality(const StatePair& grad_now, const StatePair& grad_start) {
    const double base = norm(grad_start);
    if (!(base > 0.0)) throw std::invalid_argument("first_order_optimality: initial gradient is zero");
    StatePair g = grad_now;
    apply_mask(g);
    return norm(g) / base;
}

struct ConvexityProbe {
    double gap = 0.0;    // J(s2) - J(s1) - <J'(s1), s2 - s1>
    double floor = 0.0;  // (alpha / 2) |s2 - s1|_H2^2
};

/// Bregman gap between two states that share their pinned entries.
inline ConvexityProbe convexity_probe(const StatePair& s1, const StatePair& s2, const ConvexParams& params,
                                      const ProblemSpec& spec) {
    if (s1.mask != s2.mask) throw std::invalid_argument("convexity_probe: states use different masks");
    for (std::size_t k = 0; k < s1.mask.size(); ++k) {
        if (s1.mask[k] && (s1.u.values()[k] != s2.u.values()[k] || s1.m.values()[k] != s2.m.values()[k])) {
            throw std::invalid_argument("convexity_probe: pinned entries differ at flat index " + std::to_string(k));
        }
    }
    const Objective obj(spec, params);
    StatePair delta{s2.u - s1.u, s2.m - s1.m, s1.mask};
    const double j1 = obj.eval(s1).total, j2 = obj.eval(s2).total;
    ConvexityProbe p;
    p.gap = j2 - j1 - dot(obj.gradient(s1), delta);
    const double n = norm_h2_pair(delta);
    p.floor = 0.5 * params.alpha * n * n;
    return p;
}

} // namespace mfgcvx
