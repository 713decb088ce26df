#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgcvx/calculus.hpp"
#include "mfgcvx/grid.hpp"

namespace mfgcvx {

/// Smallest admissible shift c for horizon T: 1 + sqrt(1 + 2T).
inline double min_c(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("min_c: T must be positive");
    return 1.0 + std::sqrt(1.0 + 2.0 * T);
}

/// Exponent of the Carleman weight, (T - t + c)^lambda.
inline double cwf_exponent(double t, double lambda, double c, double T) { return std::pow(T - t + c, lambda); }

/// Weights whose exponent exceeds this are evaluated in log space only.
inline constexpr double kMaxDirectExponent = 700.0;

/// phi(t) = exp((T - t + c)^lambda). Returns +inf when the exponent is past
/// kMaxDirectExponent; use log_cwf there.
inline double cwf(double t, double lambda, double c, double T) {
    const double e = cwf_exponent(t, lambda, c, T);
    return e > kMaxDirectExponent ? std::numeric_limits<double>::infinity() : std::exp(e);
}

inline double log_cwf(double t, double lambda, double c, double T) { return cwf_exponent(t, lambda, c, T); }

inline bool cwf_overflows(double lambda, double c, double T) { return cwf_exponent(0.0, lambda, c, T) > kMaxDirectExponent; }

/// phi sampled on the grid (constant along x).
inline Field cwf_field(const Grid& g, double lambda, double c) {
    Field f(g);
    for (std::size_t j = 0; j < g.nt; ++j) {
        const double w = cwf(g.t(j), lambda, c, g.t_max);
        for (double& v : f.slice(j)) v = w;
    }
    return f;
}

inline double q_factor(double lambda, double c, double T) { return 1.0 / (lambda * std::pow(T + c, lambda - 1.0)); }

/// Lower end of the admissible regularisation range, 2 exp(-(a - 1) c^lambda).
inline double alpha_min(double lambda, double c, double a) {
    if (!(a > 1.0)) throw std::invalid_argument("alpha_min: a must exceed 1");
    return 2.0 * std::exp(-(a - 1.0) * std::pow(c, lambda));
}

/// Parameters of the weighted least-squares functional. Derived quantities
/// are computed on demand.
struct ConvexParams {
    double lambda = 2.0;
    double c = 3.0;
    double a = 1.1;
    double d = 1.0;
    double alpha = 1e-5;
    double gamma = 0.6;
    std::optional<double> R;                 // ball radius, monitored only
    std::optional<double> balance_override;  // replaces exp(-2 a c^lambda); 0 leaves the regulariser alone

    /// Throws on violated invariants; returns warnings (empty when clean).
    std::vector<std::string> validate(double T) const {
        if (!(lambda > 0.0)) throw std::invalid_argument("params: lambda must be positive");
        if (!(a > 1.0)) throw std::invalid_argument("params: a must exceed 1");
        if (!(d > 0.0)) throw std::invalid_argument("params: d must be positive");
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("params: alpha must lie in (0, 1)");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("params: gamma must lie in (0, 1)");
        if (c < min_c(T)) {
            std::ostringstream msg;
            msg << "params: c = " << c << " is below 1 + sqrt(1 + 2T) = " << min_c(T);
            throw std::invalid_argument(msg.str());
        }
        std::vector<std::string> warnings;
        if (alpha < alpha_min(lambda, c, a)) {
            std::ostringstream msg;
            msg << "alpha = " << alpha << " is below the strong-convexity floor " << alpha_min(lambda, c, a);
            warnings.push_back(msg.str());
        }
        return warnings;
    }

    [[nodiscard]] double q(double T) const { return q_factor(lambda, c, T); }
    [[nodiscard]] double log_balance() const { return -2.0 * a * std::pow(c, lambda); }
    [[nodiscard]] double balance() const { return balance_override ? *balance_override : std::exp(log_balance()); }
    [[nodiscard]] static int k_n(int n = 1) { return (n + 1) / 2 + 4; }

    /// balance * phi(t)^2, combined in log space.
    [[nodiscard]] double residual_weight(double t, double T) const {
        if (balance_override) {
            if (*balance_override == 0.0) return 0.0;
            return *balance_override * std::exp(2.0 * cwf_exponent(t, lambda, c, T));
        }
        return std::exp(2.0 * cwf_exponent(t, lambda, c, T) + log_balance());
    }
};

// Numerical probes of the two weighted estimates --------------------------------

/// Outcome of checking one estimate over a batch of random test functions.
struct CarlemanCheckReport {
    std::string estimate;   // "carleman" or "quasi_carleman"
    double lambda_tested = 0.0;
    double c = 0.0;
    double T = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::size_t constrained = 0;  // samples that actually bound the constant
    double min_gap = 0.0;         // min (LHS - RHS) with the fitted constant, in units of each sample's LHS + |RHS|
    double fitted_C = 0.0;        // largest C1 / smallest C2 for which the inequality holds on every sample
    bool pass = false;
};

namespace detail {

/// sum_k sum_p a_kp cos(k pi (x - x_min) / L) t^(p+1); every member satisfies
/// the zero-flux condition at both walls and vanishes at t = 0, like the
/// difference of two states sharing their initial data.
class CosinePolySample {
public:
    static constexpr std::size_t kModes = 5;
    static constexpr std::size_t kPowers = 3;

    template <typename Rng>
    CosinePolySample(const Grid& g, Rng& rng) : x_min_(g.x_min), len_(g.x_max - g.x_min) {
        std::uniform_real_distribution<double> coef(-1.0, 1.0);
        do {
            for (auto& row : a_)
                for (double& v : row) v = coef(rng);
        } while (is_zero());
    }

    struct Value {
        double u, ux, uxx, ut;
    };

    [[nodiscard]] Value operator()(double x, double t) const {
        Value out{0.0, 0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < kModes; ++k) {
            const double w = static_cast<double>(k) * M_PI / len_;
            const double cs = std::cos(w * (x - x_min_)), sn = std::sin(w * (x - x_min_));
            double tp = t, dtp = 1.0;
            for (std::size_t p = 0; p < kPowers; ++p) {
                const double a = a_[k][p];
                out.u += a * cs * tp;
                out.ux += -a * w * sn * tp;
                out.uxx += -a * w * w * cs * tp;
                out.ut += a * cs * dtp;
                dtp = static_cast<double>(p + 2) * tp;
                tp *= t;
            }
        }
        return out;
    }

private:
    [[nodiscard]] bool is_zero() const {
        for (const auto& row : a_)
            for (double v : row)
                if (v != 0.0) return false;
        return true;
    }

    double x_min_, len_;
    std::array<std::array<double, kPowers>, kModes> a_{};
};

/// Space-time integrals against phi^2, divided by exp(2 (T + c)^lambda) so
/// that nothing overflows for large lambda.
class ScaledWeightedIntegral {
public:
    ScaledWeightedIntegral(const Grid& g, double lambda, double c)
        : wx_(trapezoid_weights(g.nx, g.dx)), wt_(trapezoid_weights(g.nt, g.dt)), rel_(g.nt) {
        const double top = cwf_exponent(0.0, lambda, c, g.t_max);
        for (std::size_t j = 0; j < g.nt; ++j) rel_[j] = std::exp(2.0 * (cwf_exponent(g.t(j), lambda, c, g.t_max) - top));
    }

    template <typename Integrand>
    [[nodiscard]] double operator()(std::size_t nx, std::size_t nt, Integrand&& h) const {
        double s = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
            if (rel_[j] == 0.0) continue;
            double row = 0.0;
            for (std::size_t i = 0; i < nx; ++i) row += wx_[i] * h(i, j);
            s += wt_[j] * rel_[j] * row;
        }
        return s;
    }

    [[nodiscard]] double slice(std::size_t nx, std::size_t j, auto&& h) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nx; ++i) s += wx_[i] * h(i, j);
        return s;
    }

private:
    std::vector<double> wx_, wt_, rel_;
};

struct SampleTable {
    std::vector<CosinePolySample::Value> v;
    std::size_t nx;
    const CosinePolySample::Value& operator()(std::size_t i, std::size_t j) const { return v[j * nx + i]; }
};

inline SampleTable tabulate(const CosinePolySample& s, const Grid& g) {
    SampleTable tab{std::vector<CosinePolySample::Value>(g.size()), g.nx};
    for (std::size_t j = 0; j < g.nt; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) tab.v[j * g.nx + i] = s(g.x(i), g.t(j));
    return tab;
}

inline void require_lambda(double lambda, double c, const Grid& g) {
    if (!(lambda >= 1.0)) throw std::invalid_argument("carleman check: lambda must be at least 1");
    if (c < min_c(g.t_max)) throw std::invalid_argument("carleman check: c below 1 + sqrt(1 + 2T)");
    if (!std::isfinite(std::pow(g.t_max + c, 2.0 * lambda))) {
        throw std::invalid_argument("carleman check: lambda too large to evaluate in double precision");
    }
}

} // namespace detail

/// Checks
///   int (u_t + u_xx)^2 phi^2 >= C1 [ sqrt(lambda) int u_x^2 phi^2 + lambda^2 c^lambda int u^2 phi^2
///       - e^{2 c^lambda} int (u_x^2 + u^2)(x, T) dx - lambda (T + c)^lambda e^{2 (T + c)^lambda} int u^2(x, 0) dx ]
/// on `samples` random zero-flux functions, and fits the largest admissible C1.
inline CarlemanCheckReport check_carleman_estimate(std::size_t samples, double lambda, double c, const Grid& g,
                                                   std::uint64_t seed) {
    detail::require_lambda(lambda, c, g);
    const double T = g.t_max;
    const double top = cwf_exponent(0.0, lambda, c, T);
    const detail::ScaledWeightedIntegral I(g, lambda, c);
    const std::size_t nx = g.nx, nt = g.nt;

    std::mt19937_64 rng(seed);
    std::vector<double> lhs(samples), rhs(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        const auto tab = detail::tabulate(detail::CosinePolySample(g, rng), g);
        lhs[s] = I(nx, nt, [&](std::size_t i, std::size_t j) {
            const auto& v = tab(i, j);
            return (v.ut + v.uxx) * (v.ut + v.uxx);
        });
        const double grad_term = std::sqrt(lambda) * I(nx, nt, [&](std::size_t i, std::size_t j) { return tab(i, j).ux * tab(i, j).ux; });
        const double mass_term = lambda * lambda * std::pow(c, lambda) *
                                 I(nx, nt, [&](std::size_t i, std::size_t j) { return tab(i, j).u * tab(i, j).u; });
        const double final_term = std::exp(2.0 * (std::pow(c, lambda) - top)) *
                                  I.slice(nx, nt - 1, [&](std::size_t i, std::size_t j) {
                                      return tab(i, j).ux * tab(i, j).ux + tab(i, j).u * tab(i, j).u;
                                  });
        const double initial_term = lambda * std::pow(T + c, lambda) *
                                    I.slice(nx, 0, [&](std::size_t i, std::size_t j) { return tab(i, j).u * tab(i, j).u; });
        rhs[s] = grad_term + mass_term - final_term - initial_term;
    }

    CarlemanCheckReport rep;
    rep.estimate = "carleman";
    rep.lambda_tested = lambda;
    rep.c = c;
    rep.T = T;
    rep.samples = samples;
    rep.seed = seed;
    rep.fitted_C = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        if (rhs[s] > 0.0) {
            ++rep.constrained;
            rep.fitted_C = std::min(rep.fitted_C, lhs[s] / rhs[s]);
        }
    }
    // With no constraining sample every C1 > 0 works; report the gap at C1 = 1.
    const double C = std::isfinite(rep.fitted_C) ? rep.fitted_C : 1.0;
    rep.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples; ++s) {
        const double scale = lhs[s] + std::abs(C * rhs[s]);
        const double gap = scale > 0.0 ? (lhs[s] - C * rhs[s]) / scale : 0.0;
        rep.min_gap = std::min(rep.min_gap, gap);
    }
    if (samples == 0) rep.min_gap = 0.0;
    rep.pass = rep.fitted_C > 0.0 && rep.min_gap >= -1e-12;
    return rep;
}

/// Checks
///   int (u_t - u_xx + g v_xx)^2 phi^2 >= lambda c^{lambda-1} int u_x^2 phi^2 + lambda^2/4 c^{2 lambda - 2} int u^2 phi^2
///       - C2 lambda (T + c)^lambda [ int v_x^2 phi^2 + e^{2 (T + c)^lambda} int u^2(x, 0) dx ]
/// on random pairs (u, v) and fits the smallest admissible C2.
inline CarlemanCheckReport check_quasi_carleman(std::size_t samples, const Field& g_field, double lambda, double c,
                                                const Grid& g, std::uint64_t seed) {
    detail::require_lambda(lambda, c, g);
    if (!(g_field.grid() == g)) throw std::invalid_argument("quasi-Carleman check: g must live on the grid");
    if (!g_field.all_finite()) throw std::invalid_argument("quasi-Carleman check: g must be bounded");
    const double T = g.t_max;
    const detail::ScaledWeightedIntegral I(g, lambda, c);
    const std::size_t nx = g.nx, nt = g.nt;

    std::mt19937_64 rng(seed);
    std::vector<double> lhs(samples), pos(samples), neg(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        const auto tu = detail::tabulate(detail::CosinePolySample(g, rng), g);
        const auto tv = detail::tabulate(detail::CosinePolySample(g, rng), g);
        lhs[s] = I(nx, nt, [&](std::size_t i, std::size_t j) {
            const double e = tu(i, j).ut - tu(i, j).uxx + g_field(i, j) * tv(i, j).uxx;
            return e * e;
        });
        pos[s] = lambda * std::pow(c, lambda - 1.0) * I(nx, nt, [&](std::size_t i, std::size_t j) { return tu(i, j).ux * tu(i, j).ux; }) +
                 0.25 * lambda * lambda * std::pow(c, 2.0 * lambda - 2.0) *
                     I(nx, nt, [&](std::size_t i, std::size_t j) { return tu(i, j).u * tu(i, j).u; });
        neg[s] = lambda * std::pow(T + c, lambda) *
                 (I(nx, nt, [&](std::size_t i, std::size_t j) { return tv(i, j).ux * tv(i, j).ux; }) +
                  I.slice(nx, 0, [&](std::size_t i, std::size_t j) { return tu(i, j).u * tu(i, j).u; }));
    }

    CarlemanCheckReport rep;
    rep.estimate = "quasi_carleman";
    rep.lambda_tested = lambda;
    rep.c = c;
    rep.T = T;
    rep.samples = samples;
    rep.seed = seed;
    rep.fitted_C = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        if (lhs[s] < pos[s]) {
            ++rep.constrained;
            rep.fitted_C = neg[s] > 0.0 ? std::max(rep.fitted_C, (pos[s] - lhs[s]) / neg[s])
                                        : std::numeric_limits<double>::infinity();
        }
    }
    rep.min_gap = samples ? std::numeric_limits<double>::infinity() : 0.0;
    if (!std::isfinite(rep.fitted_C)) rep.min_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples && std::isfinite(rep.fitted_C); ++s) {
        const double r = pos[s] - rep.fitted_C * neg[s];
        const double scale = lhs[s] + std::abs(pos[s]) + rep.fitted_C * neg[s];
        rep.min_gap = std::min(rep.min_gap, scale > 0.0 ? (lhs[s] - r) / scale : 0.0);
    }
    rep.pass = std::isfinite(rep.fitted_C) && rep.min_gap >= -1e-12;
    return rep;
}

/// Runs check_carleman_estimate over increasing lambdas; returns every report
/// and the first lambda that passes (nullopt when none does).
struct LambdaSweep {
    std::vector<CarlemanCheckReport> reports;
    std::optional<double> threshold;
};

template <typename Check>
LambdaSweep sweep_lambda(const std::vector<double>& lambdas, Check&& check) {
    LambdaSweep out;
    for (double l : lambdas) {
        out.reports.push_back(check(l));
        if (!out.threshold && out.reports.back().pass) out.threshold = l;
    }
    return out;
}

} // namespace mfgcvx
