#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfgcvx/grid.hpp"
#include "mfgcvx/mfg_model.hpp"
#include "mfgcvx/objective.hpp"

namespace mfgcvx {

enum class DescentMethod {
    gradient,  // plain projected gradient steps
    lbfgs,     // limited-memory quasi-Newton directions, same line search and projection
    newton,    // damped Newton on the free nodes, same line search and projection
};

inline const char* to_string(DescentMethod m) {
    switch (m) {
    case DescentMethod::gradient: return "gradient";
    case DescentMethod::lbfgs: return "lbfgs";
    case DescentMethod::newton: return "newton";
    }
    return "?";
}

inline DescentMethod parse_descent_method(const std::string& s) {
    if (s == "gradient") return DescentMethod::gradient;
    if (s == "lbfgs") return DescentMethod::lbfgs;
    if (s == "newton") return DescentMethod::newton;
    throw std::invalid_argument("unknown descent method '" + s + "' (expected gradient, lbfgs or newton)");
}

struct OptimizerConfig {
    double step0 = 1.0;
    double tol = 1e-5;
    std::size_t max_iters = 20000;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    std::uint64_t seed = 0;  // reserved; the descent is deterministic
    std::size_t max_backtracks = 60;
    DescentMethod method = DescentMethod::gradient;
    std::size_t lbfgs_memory = 10;

    void validate() const {
        if (!(step0 > 0.0)) throw std::invalid_argument("optimizer: step0 must be positive");
        if (!(tol > 0.0)) throw std::invalid_argument("optimizer: tol must be positive");
        if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw std::invalid_argument("optimizer: armijo_c must lie in (0, 1)");
        if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
            throw std::invalid_argument("optimizer: backtrack_factor must lie in (0, 1)");
        }
        if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be at least 1");
        if (max_backtracks < 1) throw std::invalid_argument("optimizer: max_backtracks must be at least 1");
        if (method == DescentMethod::lbfgs && lbfgs_memory < 1) throw std::invalid_argument("optimizer: lbfgs_memory must be at least 1");
    }
};

struct IterationRecord {
    std::size_t iter = 0;
    ObjectiveBreakdown objective;
    double grad_norm = 0.0;
    double optimality = 0.0;  // first-order optimality ratio
    double step = 0.0;        // accepted step (0 for the start record)
    double state_norm = 0.0;  // Euclidean norm of the node values
};

using IterationTrace = std::vector<IterationRecord>;

enum class MinimizeStatus { converged, budget, stalled };

inline const char* to_string(MinimizeStatus s) {
    switch (s) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::budget: return "budget";
    case MinimizeStatus::stalled: return "stalled";
    }
    return "?";
}

struct MinimizeResult {
    StatePair state;
    IterationTrace trace;
    MinimizeStatus status = MinimizeStatus::budget;
    std::string message;
    double optimality = 0.0;
    std::size_t iterations = 0;
};

/// Extends the initial data constantly in time and pins the t = 0 plane.
inline StatePair make_start(const ProblemSpec& spec) {
    validate_problem(spec);
    return {extend_constant_in_time(spec.grid, spec.u0), extend_constant_in_time(spec.grid, spec.m0),
            initial_plane_mask(spec.grid)};
}

/// Restores every pinned entry to the initial data; everything else is kept.
inline StatePair project(StatePair s, const ProblemSpec& spec) {
    const std::size_t nx = spec.grid.nx;
    if (s.mask.size() != s.u.size() || s.u.size() != s.m.size() || s.u.nx() != nx) {
        throw std::invalid_argument("project: state shape does not match the problem");
    }
    for (std::size_t k = 0; k < s.mask.size(); ++k) {
        if (s.mask[k]) {
            s.u.values()[k] = spec.u0[k % nx];
            s.m.values()[k] = spec.m0[k % nx];
        }
    }
    return s;
}

namespace detail {

inline double state_norm(const StatePair& s) { return std::sqrt(dot(s.u, s.u) + dot(s.m, s.m)); }

/// Two-loop recursion: returns -H g for the stored curvature pairs.
inline StatePair lbfgs_direction(const StatePair& g, const std::deque<std::pair<StatePair, StatePair>>& pairs) {
    StatePair q = g;
    std::vector<double> alpha(pairs.size()), rho(pairs.size());
    for (std::size_t k = pairs.size(); k-- > 0;) {
        const auto& [s, y] = pairs[k];
        rho[k] = 1.0 / dot(y, s);
        alpha[k] = rho[k] * dot(s, q);
        axpy(q, -alpha[k], y);
    }
    if (!pairs.empty()) {
        const auto& [s, y] = pairs.back();
        const double gamma = dot(s, y) / dot(y, y);
        q.u *= gamma;
        q.m *= gamma;
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& [s, y] = pairs[k];
        const double beta = rho[k] * dot(y, q);
        axpy(q, alpha[k] - beta, s);
    }
    q.u *= -1.0;
    q.m *= -1.0;
    return q;
}

/// Free (unmasked) flat indices, shared by u and m.
inline std::vector<std::size_t> free_indices(const StatePair& s) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < s.mask.size(); ++k)
        if (!s.mask[k]) idx.push_back(k);
    return idx;
}

inline Eigen::VectorXd pack(const StatePair& s, const std::vector<std::size_t>& idx) {
    const std::size_t n = idx.size();
    Eigen::VectorXd v(2 * n);
    for (std::size_t r = 0; r < n; ++r) {
        v[r] = s.u.values()[idx[r]];
        v[n + r] = s.m.values()[idx[r]];
    }
    return v;
}

inline void unpack(StatePair& s, const std::vector<std::size_t>& idx, const Eigen::VectorXd& v) {
    const std::size_t n = idx.size();
    for (std::size_t r = 0; r < n; ++r) {
        s.u.values()[idx[r]] = v[r];
        s.m.values()[idx[r]] = v[n + r];
    }
}

/// Newton direction on the free nodes. The Hessian is the central difference
/// of the exact gradient, symmetrised; a Levenberg shift mu I is raised until
/// the Cholesky factorisation succeeds and the direction descends.
inline StatePair newton_direction(const Objective& obj, const StatePair& s, const StatePair& grad) {
    const auto idx = free_indices(s);
    const Eigen::VectorXd x = pack(s, idx);
    const Eigen::VectorXd g = pack(grad, idx);
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h(n, n);
    StatePair probe = s;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double eps = 1e-5 * (1.0 + std::abs(x[c]));
        Eigen::VectorXd xp = x;
        xp[c] += eps;
        unpack(probe, idx, xp);
        const Eigen::VectorXd gp = pack(obj.gradient(probe), idx);
        xp[c] -= 2.0 * eps;
        unpack(probe, idx, xp);
        const Eigen::VectorXd gm = pack(obj.gradient(probe), idx);
        h.col(c) = (gp - gm) / (2.0 * eps);
    }
    h = 0.5 * (h + h.transpose()).eval();

    const double scale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd d;
    for (double mu = 0.0;; mu = mu == 0.0 ? 1e-10 * scale : 10.0 * mu) {
        if (mu > 1e10 * scale) {
            d = -g;
            break;
        }
        Eigen::MatrixXd a = h;
        a.diagonal().array() += mu;
        const Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) continue;
        d = -llt.solve(g);
        if (d.allFinite() && g.dot(d) < 0.0) break;
    }
    StatePair out{Field(s.grid()), Field(s.grid()), s.mask};
    unpack(out, idx, d);
    return out;
}

} // namespace detail

/// Minimises J over states carrying the problem's initial data.
///
/// Each iterate is project(s - xi * d) where d is the masked gradient (or an
/// L-BFGS / damped Newton direction built from masked gradients) and
/// xi = step0 * factor^k is the first trial step meeting the Armijo condition. Stops once the
/// first-order optimality ratio drops below `tol`.
inline MinimizeResult minimize(const ProblemSpec& spec, const ConvexParams& params, const OptimizerConfig& config,
                               std::optional<StatePair> start = std::nullopt) {
    config.validate();
    params.validate(spec.grid.t_max);
    const Objective obj(spec, params);

    MinimizeResult res;
    res.state = project(start ? std::move(*start) : make_start(spec), spec);
    ObjectiveBreakdown val = obj.eval(res.state);
    StatePair grad = obj.gradient(res.state);
    const StatePair grad_start = grad;
    const double g0 = norm(grad);

    res.trace.push_back({0, val, g0, g0 > 0.0 ? 1.0 : 0.0, 0.0, detail::state_norm(res.state)});
    if (!(g0 > 0.0)) {
        res.status = MinimizeStatus::converged;
        res.message = "start state is stationary";
        return res;
    }

    std::deque<std::pair<StatePair, StatePair>> pairs;
    for (std::size_t it = 1; it <= config.max_iters; ++it) {
        StatePair dir;
        double slope;
        if (config.method == DescentMethod::newton) {
            dir = detail::newton_direction(obj, res.state, grad);
            slope = dot(grad, dir);
        } else if (config.method == DescentMethod::lbfgs) {
            dir = detail::lbfgs_direction(grad, pairs);
            apply_mask(dir);
            slope = dot(grad, dir);
            if (!(slope < 0.0)) {
                pairs.clear();
                dir = grad;
                dir.u *= -1.0;
                dir.m *= -1.0;
                slope = -dot(grad, grad);
            }
        } else {
            dir = grad;
            dir.u *= -1.0;
            dir.m *= -1.0;
            slope = -dot(grad, grad);
        }

        double step = config.step0;
        bool accepted = false;
        StatePair trial;
        ObjectiveBreakdown trial_val;
        for (std::size_t k = 0; k <= config.max_backtracks; ++k) {
            trial = res.state;
            axpy(trial, step, dir);
            trial = project(std::move(trial), spec);
            try {
                trial_val = obj.eval(trial);
                if (trial_val.total <= val.total + config.armijo_c * step * slope) {
                    accepted = true;
                    break;
                }
            } catch (const numerical_error&) {
                // Overshoot into a non-finite region; shrink and retry.
            }
            step *= config.backtrack_factor;
        }
        if (!accepted) {
            res.status = MinimizeStatus::stalled;
            res.message = "line search failed after " + std::to_string(config.max_backtracks) +
                          " backtracks at iteration " + std::to_string(it) + " (objective and gradient disagree?)";
            break;
        }

        StatePair new_grad = obj.gradient(trial);
        if (config.method == DescentMethod::lbfgs) {
            StatePair s{trial.u - res.state.u, trial.m - res.state.m, trial.mask};
            StatePair y{new_grad.u - grad.u, new_grad.m - grad.m, trial.mask};
            if (dot(s, y) > 1e-12 * norm(s) * norm(y)) {
                pairs.emplace_back(std::move(s), std::move(y));
                if (pairs.size() > config.lbfgs_memory) pairs.pop_front();
            }
        }
        res.state = std::move(trial);
        val = trial_val;
        grad = std::move(new_grad);
        const double optimality = first_order_optimality(grad, grad_start);
        res.iterations = it;
        res.trace.push_back({it, val, norm(grad), optimality, step, detail::state_norm(res.state)});
        if (optimality < config.tol) {
            res.status = MinimizeStatus::converged;
            break;
        }
    }
    res.optimality = res.trace.back().optimality;
    if (res.status == MinimizeStatus::budget) res.message = "iteration budget exhausted";
    return res;
}

} // namespace mfgcvx
