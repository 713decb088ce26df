#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfgcvx/carleman.hpp"
#include "mfgcvx/csv.hpp"
#include "mfgcvx/error.hpp"
#include "mfgcvx/experiments.hpp"
#include "mfgcvx/mfg_model.hpp"
#include "mfgcvx/optimizer.hpp"

namespace mfgcvx {

using json = nlohmann::ordered_json;

// Plain writers ------------------------------------------------------------------

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw io_error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": " + e.what());
    }
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw io_error("cannot create directory " + dir.string());
}

/// Non-finite numbers become null, which JSON can represent.
inline json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Traces and objective values ------------------------------------------------------

inline void write_trace_csv(const std::filesystem::path& path, const IterationTrace& trace) {
    std::vector<std::vector<double>> cols(8);
    for (const auto& r : trace) {
        cols[0].push_back(static_cast<double>(r.iter));
        cols[1].push_back(r.objective.j1);
        cols[2].push_back(r.objective.j2);
        cols[3].push_back(r.objective.j3);
        cols[4].push_back(r.objective.total);
        cols[5].push_back(r.grad_norm);
        cols[6].push_back(r.optimality);
        cols[7].push_back(r.step);
    }
    write_columns_csv(path, {"iter", "j1", "j2", "j3", "total", "grad_norm", "optimality", "step"}, cols);
}

inline json to_json(const ObjectiveBreakdown& b) {
    return {{"j1", real(b.j1)}, {"j2", real(b.j2)}, {"j3", real(b.j3)}, {"total", real(b.total)}};
}

inline json to_json(const CarlemanCheckReport& r) {
    return {{"estimate", r.estimate}, {"lambda", r.lambda_tested}, {"c", r.c},          {"T", r.T},
            {"samples", r.samples},   {"seed", r.seed},            {"constrained", r.constrained},
            {"fitted_C", real(r.fitted_C)}, {"min_gap", real(r.min_gap)}, {"pass", r.pass}};
}

inline json to_json(const LambdaSweep& s) {
    json reports = json::array();
    for (const auto& r : s.reports) reports.push_back(to_json(r));
    return {{"threshold", s.threshold ? json(*s.threshold) : json(nullptr)}, {"reports", reports}};
}

// Configs ---------------------------------------------------------------------------

/// `key = value` lines in the order of config_entries.
inline std::string config_text(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
    return out;
}

inline json config_json(const ExperimentConfig& c) {
    json j = json::object();
    for (const auto& [k, v] : config_entries(c)) j[k] = v;
    return j;
}

// Manufactured cases -------------------------------------------------------------------

/// Writes u_true.csv, m_true.csv, f.csv, r.csv and ideal_case.json into `dir`.
inline void write_ideal_case(const std::filesystem::path& dir, const IdealCase& c) {
    ensure_dir(dir);
    write_field_csv(dir / "u_true.csv", c.u_true);
    write_field_csv(dir / "m_true.csv", c.m_true);
    write_field_csv(dir / "f.csv", c.f);
    write_field_csv(dir / "r.csv", c.spec.r);
    const KernelSpec& k = c.spec.kernel;
    json kernel = k.kind == KernelSpec::Kind::constant ? json{{"kind", "constant"}, {"value", k.c0}}
                                                       : json{{"kind", "tabulated"}, {"n", k.n}, {"table", k.table}};
    write_json(dir / "ideal_case.json", {{"source", c.source},
                                         {"gamma", c.spec.grid.gamma},
                                         {"kernel", kernel},
                                         {"l1_residual", c.l1_residual},
                                         {"l2_residual", c.l2_residual},
                                         {"l2_bound", c.l2_bound}});
}

inline IdealCase read_ideal_case(const std::filesystem::path& dir) {
    const json meta = read_json(dir / "ideal_case.json");
    IdealCase c;
    try {
        const double gamma = meta.at("gamma").get<double>();
        c.u_true = read_field_csv(dir / "u_true.csv", gamma);
        c.m_true = read_field_csv(dir / "m_true.csv", gamma);
        c.f = read_field_csv(dir / "f.csv", gamma);
        Field r = read_field_csv(dir / "r.csv", gamma);
        const Grid& g = c.u_true.grid();
        if (!(c.m_true.grid() == g) || !(c.f.grid() == g) || !(r.grid() == g)) {
            throw io_error("ideal case: field files disagree on the grid");
        }
        const json& k = meta.at("kernel");
        KernelSpec kernel;
        if (k.at("kind") == "constant") {
            kernel = KernelSpec::constant(k.at("value").get<double>());
        } else {
            kernel.kind = KernelSpec::Kind::tabulated;
            kernel.n = k.at("n").get<std::size_t>();
            kernel.table = k.at("table").get<std::vector<double>>();
            if (kernel.table.size() != kernel.n * kernel.n) throw io_error("ideal case: kernel table has the wrong size");
        }
        c.spec = ProblemSpec{g, std::move(r), std::move(kernel), c.f, slice_at_time(c.u_true, 0), slice_at_time(c.m_true, 0)};
        validate_problem(c.spec);
        c.source = meta.at("source").get<std::string>();
        c.l1_residual = meta.at("l1_residual").get<double>();
        c.l2_residual = meta.at("l2_residual").get<double>();
        c.l2_bound = meta.at("l2_bound").get<double>();
    } catch (const json::exception& e) {
        throw io_error("ideal case: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw io_error("ideal case: " + std::string(e.what()));
    }
    return c;
}

// Run reports ---------------------------------------------------------------------------

/// Summary statistics of F(t) over the windows the diagnostics look at.
struct CostStats {
    double min = 0.0, max = 0.0;
    double mean_early = 0.0;  // t in (0, 0.3)
    double mean_mid = 0.0;    // t in [0.3, 1]
    double min_mid = 0.0;
    double max_late = 0.0;    // t in (1, T]; 0 when T <= 1
};

inline CostStats cost_stats(const std::vector<double>& times, const std::vector<double>& f) {
    constexpr double eps = 1e-12;
    CostStats s;
    s.min = std::numeric_limits<double>::infinity();
    s.min_mid = std::numeric_limits<double>::infinity();
    double early = 0.0, mid = 0.0;
    std::size_t n_early = 0, n_mid = 0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        const double t = times[j];
        s.min = std::min(s.min, f[j]);
        s.max = std::max(s.max, f[j]);
        if (t > eps && t < 0.3 - eps) {
            early += f[j];
            ++n_early;
        } else if (t >= 0.3 - eps && t <= 1.0 + eps) {
            mid += f[j];
            ++n_mid;
            s.min_mid = std::min(s.min_mid, f[j]);
        } else if (t > 1.0 + eps) {
            s.max_late = std::max(s.max_late, f[j]);
        }
    }
    s.mean_early = n_early ? early / static_cast<double>(n_early) : 0.0;
    s.mean_mid = n_mid ? mid / static_cast<double>(n_mid) : 0.0;
    if (!n_mid) s.min_mid = 0.0;
    return s;
}

inline json summary_json(const RunReport& r) {
    const CostStats cs = cost_stats(r.times, r.rel_cost);
    json j = {{"test", to_string(r.config.test)},
              {"status", to_string(r.status)},
              {"message", r.message},
              {"iterations", r.iterations},
              {"optimality", real(r.optimality)},
              {"objective", to_json(r.objective)},
              {"rel_cost", {{"min", real(cs.min)},
                            {"max", real(cs.max)},
                            {"mean_early", real(cs.mean_early)},
                            {"mean_mid", real(cs.mean_mid)},
                            {"min_mid", real(cs.min_mid)},
                            {"max_late", real(cs.max_late)}}}};
    if (r.errors) j["errors"] = {{"h10_u", real(r.errors->h10_u)}, {"h10_m", real(r.errors->h10_m)}};
    if (r.truth) {
        j["truth"] = {{"l1_residual", real(r.truth->l1_residual)},
                      {"l2_residual", real(r.truth->l2_residual)},
                      {"l2_bound", real(r.truth->l2_bound)}};
    }
    j["warnings"] = r.warnings;
    j["config"] = config_json(r.config);
    return j;
}

/// Times at which slices.csv samples the fields.
inline std::vector<std::size_t> slice_indices(const Grid& g) {
    std::vector<std::size_t> out;
    for (double t : {0.0, 0.6, 1.0, 1.2, 1.6, 2.0}) {
        if (t > g.t_max + 1e-12) break;
        const double k = t / g.dt;
        const auto j = static_cast<std::size_t>(std::llround(k));
        if (std::abs(k - static_cast<double>(j)) < 1e-9) out.push_back(j);
    }
    return out;
}

/// Files written into `dir`:
///   config.txt      resolved configuration, `key = value`
///   summary.json    status, objective breakdown, optimality, errors, F(t) stats
///   u.csv, m.csv    predicted fields (`x,t,value`)
///   u_true.csv, m_true.csv, f.csv   ideal tests only
///   initial_data.csv  x, u0, m0 (the noisy data actually used)
///   rel_cost.csv    t, F
///   errors.csv      t, rel_l2_u, rel_l2_m (ideal tests only)
///   slices.csv      predicted (and true) profiles at t = 0, 0.6, 1 (and 1.2, 1.6, 2)
///   trace.csv       iteration log
inline void write_run_report(const std::filesystem::path& dir, const RunReport& r) {
    ensure_dir(dir);
    const Grid& g = r.spec.grid;
    write_text(dir / "config.txt", config_text(r.config));
    write_json(dir / "summary.json", summary_json(r));
    write_field_csv(dir / "u.csv", r.predicted.u);
    write_field_csv(dir / "m.csv", r.predicted.m);
    if (r.truth) {
        write_field_csv(dir / "u_true.csv", r.truth->u_true);
        write_field_csv(dir / "m_true.csv", r.truth->m_true);
        write_field_csv(dir / "f.csv", r.truth->f);
    }
    std::vector<double> xs(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) xs[i] = g.x(i);
    write_columns_csv(dir / "initial_data.csv", {"x", "u0", "m0"}, {xs, r.spec.u0, r.spec.m0});
    write_columns_csv(dir / "rel_cost.csv", {"t", "F"}, {r.times, r.rel_cost});
    if (r.errors) write_columns_csv(dir / "errors.csv", {"t", "rel_l2_u", "rel_l2_m"}, {r.times, r.errors->rel_l2_u, r.errors->rel_l2_m});

    std::vector<std::string> names{"t", "x", "u", "m"};
    if (r.truth) {
        names.push_back("u_true");
        names.push_back("m_true");
    }
    std::vector<std::vector<double>> cols(names.size());
    for (std::size_t j : slice_indices(g)) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            cols[0].push_back(g.t(j));
            cols[1].push_back(g.x(i));
            cols[2].push_back(r.predicted.u(i, j));
            cols[3].push_back(r.predicted.m(i, j));
            if (r.truth) {
                cols[4].push_back(r.truth->u_true(i, j));
                cols[5].push_back(r.truth->m_true(i, j));
            }
        }
    }
    write_columns_csv(dir / "slices.csv", names, cols);
    write_trace_csv(dir / "trace.csv", r.trace);
}

} // namespace mfgcvx
