#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfgcvx/calculus.hpp"
#include "mfgcvx/carleman.hpp"
#include "mfgcvx/grid.hpp"
#include "mfgcvx/mfg_model.hpp"
#include "mfgcvx/objective.hpp"
#include "mfgcvx/optimizer.hpp"

namespace mfgcvx {

// Noise ------------------------------------------------------------------------

struct NoiseSpec {
    double level = 0.03;
    std::uint64_t seed = 0;
};

/// out_i = data_i + level * |data|_2 * r_i with r_i ~ U[-1, 1] drawn from a
/// generator seeded with `noise.seed`.
inline std::vector<double> add_noise(std::span<const double> data, const NoiseSpec& noise) {
    if (!(noise.level >= 0.0) || !std::isfinite(noise.level)) throw std::invalid_argument("add_noise: level must be >= 0");
    double sq = 0.0;
    for (double v : data) {
        if (!std::isfinite(v)) throw std::invalid_argument("add_noise: data must be finite");
        sq += v * v;
    }
    std::vector<double> out(data.begin(), data.end());
    if (noise.level == 0.0) return out;
    const double amp = noise.level * std::sqrt(sq);
    std::mt19937_64 rng(noise.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double& v : out) v += amp * unit(rng);
    return out;
}

// Diagnostics ------------------------------------------------------------------

/// F(t_j) = sqrt( int (L1^2 + L2^2)(x, t_j) dx / int (u^2 + m^2)(x, 0) dx ),
/// with no Carleman weight and no regulariser.
inline std::vector<double> relative_cost_curve(const StatePair& s, const ProblemSpec& spec) {
    const Grid& g = spec.grid;
    const Operators ops(g);
    const Field l1 = residual_l1(s.u, s.m, spec, ops);
    const Field l2 = residual_l2(s.u, s.m, spec, ops);
    std::vector<double> row(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) row[i] = s.u(i, 0) * s.u(i, 0) + s.m(i, 0) * s.m(i, 0);
    const double den = integrate_x(g, row);
    if (!(den > 0.0)) throw std::invalid_argument("relative_cost_curve: initial data has zero norm");
    std::vector<double> out(g.nt);
    for (std::size_t j = 0; j < g.nt; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) row[i] = l1(i, j) * l1(i, j) + l2(i, j) * l2(i, j);
        out[j] = std::sqrt(integrate_x(g, row) / den);
    }
    return out;
}

struct ErrorMetrics {
    double h10_u = 0.0;  // |u - u_true| in H^{1,0}(Q_{gamma T})
    double h10_m = 0.0;
    std::vector<double> rel_l2_u;  // per time node; absolute where the truth slice vanishes
    std::vector<double> rel_l2_m;
};

inline ErrorMetrics error_vs_truth(const StatePair& pred, const Field& u_true, const Field& m_true, double gamma) {
    if (!(pred.u.grid() == u_true.grid()) || !(pred.m.grid() == m_true.grid()) || !(u_true.grid() == m_true.grid())) {
        throw std::invalid_argument("error_vs_truth: prediction and truth live on different grids");
    }
    const Grid& g = u_true.grid();
    ErrorMetrics e;
    const Field du = pred.u - u_true, dm = pred.m - m_true;
    e.h10_u = norm_h10_qgamma(du, gamma);
    e.h10_m = norm_h10_qgamma(dm, gamma);
    auto curve = [&](const Field& diff, const Field& truth) {
        std::vector<double> out(g.nt), a(g.nx), b(g.nx);
        for (std::size_t j = 0; j < g.nt; ++j) {
            for (std::size_t i = 0; i < g.nx; ++i) {
                a[i] = diff(i, j) * diff(i, j);
                b[i] = truth(i, j) * truth(i, j);
            }
            const double num = std::sqrt(integrate_x(g, a)), den = std::sqrt(integrate_x(g, b));
            out[j] = den > 0.0 ? num / den : num;
        }
        return out;
    };
    e.rel_l2_u = curve(du, u_true);
    e.rel_l2_m = curve(dm, m_true);
    return e;
}

inline ErrorMetrics error_vs_truth(const StatePair& pred, const IdealCase& truth, double gamma) {
    return error_vs_truth(pred, truth.u_true, truth.m_true, gamma);
}

// Canned tests -----------------------------------------------------------------

enum class TestId { T1_1, T1_2, T2_1, T2_2, T3_1, T1_1_extended, kernel_compare };

inline constexpr TestId kAllTests[] = {TestId::T1_1, TestId::T1_2,          TestId::T2_1,          TestId::T2_2,
                                       TestId::T3_1, TestId::T1_1_extended, TestId::kernel_compare};

inline const char* to_string(TestId id) {
    switch (id) {
    case TestId::T1_1: return "T1_1";
    case TestId::T1_2: return "T1_2";
    case TestId::T2_1: return "T2_1";
    case TestId::T2_2: return "T2_2";
    case TestId::T3_1: return "T3_1";
    case TestId::T1_1_extended: return "T1_1_extended";
    case TestId::kernel_compare: return "kernel_compare";
    }
    return "?";
}

inline TestId parse_test_id(const std::string& s) {
    for (TestId id : kAllTests)
        if (s == to_string(id)) return id;
    throw std::invalid_argument("unknown test '" + s + "'");
}

/// Ideal tests have a manufactured truth; the rest run with f = 0.
inline bool is_ideal(TestId id) { return id == TestId::T1_1 || id == TestId::T1_2 || id == TestId::T1_1_extended; }

namespace initial_data {

/// exp(1 / (x^2 - 1)) + 0.28 on (-1, 1), 0.28 at the walls.
inline double bump_plus_floor(double x) { return (std::abs(x) < 1.0 ? std::exp(1.0 / (x * x - 1.0)) : 0.0) + 0.28; }

/// 5.57 exp(0.4^2 / ((x - x0)^2 - 0.4^2)) inside |x - x0| < 0.4, else 0.
inline double compact_bump(double x, double x0) {
    const double s = (x - x0) * (x - x0) - 0.16;
    return s < 0.0 ? 5.57 * std::exp(0.16 / s) : 0.0;
}

inline double tau(double x) { return x > 0.0 ? std::exp(-1.0 / (x * x)) : 0.0; }

/// Smooth step from -0.5 at x = -1 to 0.5 at x = 1.
inline double smooth_transition(double x) {
    const double a = tau((1.0 + x) / 2.0), b = tau((1.0 - x) / 2.0);
    if (a + b == 0.0) return x < 0.0 ? -0.5 : 0.5;
    return a / (a + b) - 0.5;
}

inline double u_quartic(double x, double t) { return (x * x - 1.0) * (x * x - 1.0) * (t * t + 1.0); }
inline double u_cosine(double x, double t) { return 0.1 * std::cos(2.0 * M_PI * x) * (t + 1.0); }

} // namespace initial_data

/// Everything needed to reproduce one run.
struct ExperimentConfig {
    TestId test = TestId::T1_1;
    double lambda = 2.0;
    std::optional<double> c;  // unset: max(3, 1 + sqrt(1 + 2T))
    double a = 1.1;
    double d = 1.0;
    double alpha = 1e-5;
    double gamma = 0.6;
    double dx = 0.1;
    double dt = 0.1;
    double T = 1.0;
    double noise = 0.03;
    std::uint64_t seed = 0;
    double kernel = 1.0;  // constant K(x, y)
    OptimizerConfig optimizer;

    [[nodiscard]] double resolved_c() const { return c ? *c : std::max(3.0, min_c(T)); }

    [[nodiscard]] ConvexParams params() const {
        ConvexParams p;
        p.lambda = lambda;
        p.c = resolved_c();
        p.a = a;
        p.d = d;
        p.alpha = alpha;
        p.gamma = gamma;
        return p;
    }

    [[nodiscard]] Grid grid() const { return make_grid(-1.0, 1.0, T, dx, dt, gamma); }
};

inline std::uint64_t default_seed(TestId id) {
    switch (id) {
    case TestId::T1_1: return 11;
    case TestId::T1_2: return 12;
    case TestId::T2_1: return 21;
    case TestId::T2_2: return 22;
    case TestId::T3_1: return 31;
    case TestId::T1_1_extended: return 111;
    case TestId::kernel_compare: return 22;
    }
    return 0;
}

/// Paper settings for the test, solved with the damped Newton accelerator.
inline ExperimentConfig default_config(TestId id) {
    ExperimentConfig cfg;
    cfg.test = id;
    cfg.seed = default_seed(id);
    if (id == TestId::T1_1_extended) cfg.T = 2.0;
    if (id == TestId::kernel_compare) cfg.kernel = -1.0;
    cfg.optimizer.method = DescentMethod::newton;
    cfg.optimizer.max_iters = 200;
    return cfg;
}

/// Flat key/value view of a config, every number printed to round-trip.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
    const auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    const OptimizerConfig& o = c.optimizer;
    return {
        {"test", to_string(c.test)},
        {"lambda", num(c.lambda)},
        {"c", num(c.resolved_c())},
        {"a", num(c.a)},
        {"d", num(c.d)},
        {"alpha", num(c.alpha)},
        {"gamma", num(c.gamma)},
        {"dx", num(c.dx)},
        {"dt", num(c.dt)},
        {"T", num(c.T)},
        {"noise", num(c.noise)},
        {"seed", std::to_string(c.seed)},
        {"kernel", num(c.kernel)},
        {"method", to_string(o.method)},
        {"step0", num(o.step0)},
        {"tol", num(o.tol)},
        {"max_iters", std::to_string(o.max_iters)},
        {"armijo_c", num(o.armijo_c)},
        {"backtrack_factor", num(o.backtrack_factor)},
        {"max_backtracks", std::to_string(o.max_backtracks)},
        {"lbfgs_memory", std::to_string(o.lbfgs_memory)},
    };
}

namespace detail {

inline double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size() || !std::isfinite(out)) {
        throw std::invalid_argument("invalid value '" + v + "' for " + key + " (expected a finite number)");
    }
    return out;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        if (!v.empty() && v[0] != '-') out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) {
        throw std::invalid_argument("invalid value '" + v + "' for " + key + " (expected a non-negative integer)");
    }
    return out;
}

} // namespace detail

/// Sets one key of `config_entries` from its text form.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_count;
    using detail::parse_real;
    OptimizerConfig& o = c.optimizer;
    if (key == "test") c.test = parse_test_id(value);
    else if (key == "lambda") c.lambda = parse_real(key, value);
    else if (key == "c") c.c = parse_real(key, value);
    else if (key == "a") c.a = parse_real(key, value);
    else if (key == "d") c.d = parse_real(key, value);
    else if (key == "alpha") c.alpha = parse_real(key, value);
    else if (key == "gamma") c.gamma = parse_real(key, value);
    else if (key == "dx") c.dx = parse_real(key, value);
    else if (key == "dt") c.dt = parse_real(key, value);
    else if (key == "T") c.T = parse_real(key, value);
    else if (key == "noise") c.noise = parse_real(key, value);
    else if (key == "seed") c.seed = parse_count(key, value);
    else if (key == "kernel") c.kernel = parse_real(key, value);
    else if (key == "method") o.method = parse_descent_method(value);
    else if (key == "step0") o.step0 = parse_real(key, value);
    else if (key == "tol") o.tol = parse_real(key, value);
    else if (key == "max_iters") o.max_iters = parse_count(key, value);
    else if (key == "armijo_c") o.armijo_c = parse_real(key, value);
    else if (key == "backtrack_factor") o.backtrack_factor = parse_real(key, value);
    else if (key == "max_backtracks") o.max_backtracks = parse_count(key, value);
    else if (key == "lbfgs_memory") o.lbfgs_memory = parse_count(key, value);
    else throw std::invalid_argument("unknown setting '" + key + "'");
}

/// Checks every invariant of the config before anything is computed; returns
/// the parameter warnings.
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
    if (!(c.noise >= 0.0)) throw std::invalid_argument("config: noise must be >= 0");
    if (!(c.T > 0.0)) throw std::invalid_argument("config: T must be positive");
    (void)c.grid();
    c.optimizer.validate();
    return c.params().validate(c.T);
}

/// Output of one canned test.
struct RunReport {
    ExperimentConfig config;
    ProblemSpec spec;                 // the problem actually solved (noisy data)
    std::optional<IdealCase> truth;   // ideal tests only
    StatePair predicted;
    std::vector<double> times;
    std::vector<double> rel_cost;     // F(t), one entry per time node
    std::optional<ErrorMetrics> errors;
    ObjectiveBreakdown objective;
    MinimizeStatus status = MinimizeStatus::budget;
    std::string message;
    double optimality = 0.0;
    std::size_t iterations = 0;
    IterationTrace trace;
    std::vector<std::string> warnings;

    [[nodiscard]] bool converged() const { return status == MinimizeStatus::converged; }
};

/// Builds the clean (noise-free) problem for a test, with its truth when the
/// test has one.
inline std::pair<ProblemSpec, std::optional<IdealCase>> build_problem(const ExperimentConfig& cfg) {
    namespace id = initial_data;
    const Grid g = cfg.grid();
    const KernelSpec kernel = KernelSpec::constant(cfg.kernel);
    switch (cfg.test) {
    case TestId::T1_1:
    case TestId::T1_1_extended: {
        IdealCase ic = build_ideal_case(id::u_quartic, id::bump_plus_floor, kernel, g, to_string(cfg.test));
        ProblemSpec p = ic.spec;
        return {std::move(p), std::move(ic)};
    }
    case TestId::T1_2: {
        IdealCase ic = build_ideal_case(id::u_cosine, [](double) { return 0.5; }, kernel, g, "T1_2");
        ProblemSpec p = ic.spec;
        return {std::move(p), std::move(ic)};
    }
    case TestId::T2_1: {
        auto m0 = sample_x(g, [](double x) { return id::compact_bump(x, 0.0); });
        validate_density(g, m0);
        return {make_problem(g, kernel, sample_x(g, [](double x) { return id::u_quartic(x, 0.0); }), m0), std::nullopt};
    }
    case TestId::T2_2:
    case TestId::kernel_compare: {
        auto m0 = sample_x(g, [](double) { return 0.5; });
        validate_density(g, m0);
        return {make_problem(g, kernel, sample_x(g, [](double x) { return std::cos(2.0 * M_PI * x); }), m0),
                std::nullopt};
    }
    case TestId::T3_1: {
        auto m0 = sample_x(g, [](double x) { return id::compact_bump(x, 0.5); });
        validate_density(g, m0);
        return {make_problem(g, kernel, sample_x(g, id::smooth_transition), m0), std::nullopt};
    }
    }
    throw std::invalid_argument("build_problem: unknown test");
}

/// Replaces u0 and m0 by their noisy versions. The two vectors draw from
/// independent streams derived from the same seed.
inline void perturb_initial_data(ProblemSpec& spec, const ExperimentConfig& cfg) {
    spec.u0 = add_noise(spec.u0, {cfg.noise, cfg.seed});
    spec.m0 = add_noise(spec.m0, {cfg.noise, cfg.seed ^ 0x9e3779b97f4a7c15ULL});
    validate_problem(spec);
}

/// Builds the problem, perturbs the initial data once, minimises and
/// assembles the report.
inline RunReport run_test(const ExperimentConfig& cfg) {
    RunReport rep;
    rep.config = cfg;
    rep.warnings = validate_config(cfg);
    auto [spec, truth] = build_problem(cfg);
    perturb_initial_data(spec, cfg);

    const MinimizeResult res = minimize(spec, cfg.params(), cfg.optimizer);
    rep.predicted = res.state;
    rep.status = res.status;
    rep.message = res.message;
    rep.optimality = res.optimality;
    rep.iterations = res.iterations;
    rep.trace = res.trace;
    rep.objective = res.trace.back().objective;

    const Grid& g = spec.grid;
    rep.times.resize(g.nt);
    for (std::size_t j = 0; j < g.nt; ++j) rep.times[j] = g.t(j);
    rep.rel_cost = relative_cost_curve(rep.predicted, spec);
    if (truth) rep.errors = error_vs_truth(rep.predicted, *truth, cfg.gamma);
    rep.spec = std::move(spec);
    rep.truth = std::move(truth);
    return rep;
}

inline RunReport run_test(TestId id) { return run_test(default_config(id)); }

/// The T2_2 data solved once with K = 1 and once with K = -1.
struct KernelComparison {
    RunReport plus;
    RunReport minus;
    double max_ratio = 0.0;  // max over t in [0.3, 1] of max(F+/F-, F-/F+)
    bool similar = false;    // both converged and max_ratio < 10
};

inline KernelComparison compare_kernels(ExperimentConfig cfg) {
    cfg.test = TestId::kernel_compare;
    KernelComparison out;
    cfg.kernel = 1.0;
    out.plus = run_test(cfg);
    cfg.kernel = -1.0;
    out.minus = run_test(cfg);
    for (std::size_t j = 0; j < out.plus.times.size(); ++j) {
        const double t = out.plus.times[j];
        if (t < 0.3 - 1e-12 || t > 1.0 + 1e-12) continue;
        const double a = out.plus.rel_cost[j], b = out.minus.rel_cost[j];
        const double r = (a > 0.0 && b > 0.0) ? std::max(a / b, b / a) : (a == b ? 1.0 : HUGE_VAL);
        out.max_ratio = std::max(out.max_ratio, r);
    }
    out.similar = out.plus.converged() && out.minus.converged() && out.max_ratio < 10.0;
    return out;
}

} // namespace mfgcvx
