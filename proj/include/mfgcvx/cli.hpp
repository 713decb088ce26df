#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "mfgcvx/carleman.hpp"
#include "mfgcvx/error.hpp"
#include "mfgcvx/experiments.hpp"
#include "mfgcvx/report_io.hpp"
#include "mfgcvx/verification.hpp"

namespace mfgcvx::cli {

enum ExitCode : int { ok = 0, usage = 1, numerical = 2, io = 3 };

struct usage_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown by parse_config when --help was given; carries the rendered text.
struct help_requested : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fully resolved command line.
struct RunConfig {
    std::string command;  // run | sweep | check-gradient | check-carleman | export-case
    ExperimentConfig experiment;
    std::filesystem::path output_dir;
    std::string sweep_param;
    std::vector<std::string> sweep_values;
    std::size_t states = 10;       // check-gradient
    std::size_t directions = 50;   // check-gradient
    std::size_t samples = 100;     // check-carleman
    std::vector<double> lambdas{2, 3, 4, 5, 10, 20, 30, 40, 50};
};

/// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config file " + path.string());
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw usage_error(path.string() + ":" + std::to_string(lineno) + ": expected `key = value`, got '" + line + "'");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

namespace detail {

inline std::string kebab(std::string key) {
    for (char& ch : key)
        if (ch == '_') ch = '-';
    return key;
}

} // namespace detail

/// Parses argv. Precedence: flags, then the config file, then the defaults of
/// the selected test. Throws CLI::ParseError for malformed command lines,
/// usage_error for invalid values and help_requested for --help.
inline RunConfig parse_config(int argc, const char* const* argv) {
    CLI::App app{"Forecasting solver for a 1-D mean field games system"};
    app.require_subcommand(1);

    std::string test_flag;
    std::string config_file;
    std::string output_dir;
    std::map<std::string, std::string> flags;
    RunConfig rc;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--test", test_flag, "T1_1, T1_2, T2_1, T2_2, T3_1, T1_1_extended or kernel_compare");
        sub->add_option("--config", config_file, "file of `key = value` lines");
        sub->add_option("--output", output_dir, "output directory")->required();
        for (const auto& [key, value] : config_entries(ExperimentConfig{})) {
            if (key == "test") continue;
            const std::string k = key;
            sub->add_option_function<std::string>(
                "--" + detail::kebab(k), [&flags, k](const std::string& v) { flags[k] = v; }, "override " + k);
        }
    };

    auto* run = app.add_subcommand("run", "run one canned test and write its report");
    auto* sweep = app.add_subcommand("sweep", "run one test for several values of a parameter");
    auto* grad = app.add_subcommand("check-gradient", "compare the analytic gradient with finite differences");
    auto* carl = app.add_subcommand("check-carleman", "probe both weighted estimates over a lambda sweep");
    auto* exp = app.add_subcommand("export-case", "write the initial data (and truth) without optimising");
    for (auto* sub : {run, sweep, grad, carl, exp}) add_common(sub);
    sweep->add_option("--param", rc.sweep_param, "setting to vary")->required();
    sweep->add_option("--values", rc.sweep_values, "comma-separated values")->required()->delimiter(',');
    grad->add_option("--states", rc.states, "random states");
    grad->add_option("--directions", rc.directions, "random directions per state");
    carl->add_option("--samples", rc.samples, "random test functions per lambda");
    carl->add_option("--lambdas", rc.lambdas, "comma-separated lambdas")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::ostringstream os;
        app.exit(e, os, os);
        throw help_requested(os.str());
    } catch (const CLI::CallForAllHelp& e) {
        std::ostringstream os;
        app.exit(e, os, os);
        throw help_requested(os.str());
    }
    for (auto* sub : {run, sweep, grad, carl, exp})
        if (sub->parsed()) rc.command = sub->get_name();

    std::vector<std::pair<std::string, std::string>> file;
    if (!config_file.empty()) file = read_config_file(config_file);

    std::string test = "T1_1";
    for (const auto& [k, v] : file)
        if (k == "test") test = v;
    if (!test_flag.empty()) test = test_flag;
    try {
        rc.experiment = default_config(parse_test_id(test));
        for (const auto& [k, v] : file)
            if (k != "test") apply_setting(rc.experiment, k, v);
        for (const auto& [k, v] : flags) apply_setting(rc.experiment, k, v);
        validate_config(rc.experiment);
        if (rc.command == "sweep") {
            if (rc.sweep_param == "test") throw std::invalid_argument("sweep: use separate runs to vary the test");
            for (const auto& v : rc.sweep_values) {
                ExperimentConfig probe = rc.experiment;
                apply_setting(probe, rc.sweep_param, v);
                validate_config(probe);
            }
        }
        if (rc.command == "check-carleman") {
            if (rc.samples < 1) throw std::invalid_argument("--samples must be at least 1");
            if (rc.lambdas.empty()) throw std::invalid_argument("--lambdas must not be empty");
        }
        if (rc.command == "check-gradient" && (rc.states < 1 || rc.directions < 1)) {
            throw std::invalid_argument("--states and --directions must be at least 1");
        }
    } catch (const usage_error&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw usage_error(e.what());
    }
    rc.output_dir = output_dir;
    return rc;
}

namespace detail {

inline std::string status_line(const RunReport& r) {
    std::string s = std::string(to_string(r.config.test)) + ": " + to_string(r.status) + " after " +
                    std::to_string(r.iterations) + " iterations, optimality " + format_real(r.optimality);
    if (r.errors) s += ", H10 errors u " + format_real(r.errors->h10_u) + " m " + format_real(r.errors->h10_m);
    return s;
}

inline int run(const RunConfig& rc, std::ostream& out) {
    const std::filesystem::path& dir = rc.output_dir;
    ensure_dir(dir);
    if (rc.experiment.test == TestId::kernel_compare) {
        const KernelComparison cmp = compare_kernels(rc.experiment);
        write_run_report(dir / "kernel_plus", cmp.plus);
        write_run_report(dir / "kernel_minus", cmp.minus);
        write_text(dir / "config.txt", config_text(rc.experiment));
        write_json(dir / "comparison.json", {{"max_ratio", real(cmp.max_ratio)},
                                             {"similar", cmp.similar},
                                             {"plus_status", to_string(cmp.plus.status)},
                                             {"minus_status", to_string(cmp.minus.status)}});
        out << "K = +1 " << status_line(cmp.plus) << "\nK = -1 " << status_line(cmp.minus) << "\nmax F ratio on [0.3, 1]: "
            << format_real(cmp.max_ratio) << "\n";
        return cmp.plus.converged() && cmp.minus.converged() ? ok : numerical;
    }
    const RunReport r = run_test(rc.experiment);
    write_run_report(dir, r);
    out << status_line(r) << "\n";
    return r.converged() ? ok : numerical;
}

inline int sweep(const RunConfig& rc, std::ostream& out) {
    ensure_dir(rc.output_dir);
    write_text(rc.output_dir / "config.txt", config_text(rc.experiment));
    std::string table = rc.sweep_param + ",status,iterations,optimality,total,min_mid,mean_mid,h10_u,h10_m\n";
    bool all = true;
    for (const auto& v : rc.sweep_values) {
        ExperimentConfig cfg = rc.experiment;
        apply_setting(cfg, rc.sweep_param, v);
        const RunReport r = run_test(cfg);
        write_run_report(rc.output_dir / (rc.sweep_param + "_" + v), r);
        const CostStats cs = cost_stats(r.times, r.rel_cost);
        table += v + "," + to_string(r.status) + "," + std::to_string(r.iterations) + "," + format_real(r.optimality) +
                 "," + format_real(r.objective.total) + "," + format_real(cs.min_mid) + "," + format_real(cs.mean_mid) +
                 "," + (r.errors ? format_real(r.errors->h10_u) : "") + "," +
                 (r.errors ? format_real(r.errors->h10_m) : "") + "\n";
        out << rc.sweep_param << " = " << v << ": " << status_line(r) << "\n";
        all = all && r.converged();
    }
    write_text(rc.output_dir / "sweep.csv", table);
    return all ? ok : numerical;
}

/// The problem exactly as `run` would solve it (noisy initial data).
inline ProblemSpec noisy_problem(const ExperimentConfig& cfg) {
    ProblemSpec spec = build_problem(cfg).first;
    perturb_initial_data(spec, cfg);
    return spec;
}

inline int check_gradient_cmd(const RunConfig& rc, std::ostream& out) {
    ensure_dir(rc.output_dir);
    const ExperimentConfig& cfg = rc.experiment;
    const GradientCheck gc = check_gradient(noisy_problem(cfg), cfg.params(), rc.states, rc.directions, cfg.seed);
    write_text(rc.output_dir / "config.txt", config_text(cfg));
    write_json(rc.output_dir / "gradient_check.json", {{"test", to_string(cfg.test)},
                                                       {"states", gc.states},
                                                       {"directions", gc.directions},
                                                       {"seed", gc.seed},
                                                       {"max_rel_error", real(gc.max_rel_error)},
                                                       {"pass", gc.pass}});
    out << "max relative error " << format_real(gc.max_rel_error) << (gc.pass ? " (pass)" : " (fail)") << "\n";
    return gc.pass ? ok : numerical;
}

inline int check_carleman_cmd(const RunConfig& rc, std::ostream& out) {
    ensure_dir(rc.output_dir);
    const ExperimentConfig& cfg = rc.experiment;
    const Grid g = cfg.grid();
    const double c = cfg.resolved_c();
    auto [spec, truth] = build_problem(cfg);
    // Multiplier of the quasi estimate: r m of the truth, or of the start state
    // when the test has no truth.
    Field gm = truth ? truth->m_true : extend_constant_in_time(g, spec.m0);
    for (std::size_t k = 0; k < gm.size(); ++k) gm.values()[k] *= spec.r.values()[k];

    std::vector<double> usable;
    for (double l : rc.lambdas)
        if (l >= 1.0 && std::isfinite(std::pow(g.t_max + c, 2.0 * l))) usable.push_back(l);
    const LambdaSweep ce = sweep_lambda(usable, [&](double l) { return check_carleman_estimate(rc.samples, l, c, g, cfg.seed); });
    const LambdaSweep qc = sweep_lambda(usable, [&](double l) { return check_quasi_carleman(rc.samples, gm, l, c, g, cfg.seed); });
    write_text(rc.output_dir / "config.txt", config_text(cfg));
    write_json(rc.output_dir / "carleman.json", {{"carleman", to_json(ce)}, {"quasi_carleman", to_json(qc)}});
    const auto show = [](const std::optional<double>& t) { return t ? format_real(*t) : std::string("none"); };
    out << "Carleman estimate holds from lambda = " << show(ce.threshold) << "; quasi-Carleman from lambda = "
        << show(qc.threshold) << "\n";
    return ce.threshold && qc.threshold ? ok : numerical;
}

inline int export_case(const RunConfig& rc, std::ostream& out) {
    ensure_dir(rc.output_dir);
    const ExperimentConfig& cfg = rc.experiment;
    auto [clean, truth] = build_problem(cfg);
    const ProblemSpec noisy = noisy_problem(cfg);
    const Grid& g = clean.grid;
    std::vector<double> xs(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) xs[i] = g.x(i);
    write_text(rc.output_dir / "config.txt", config_text(cfg));
    write_columns_csv(rc.output_dir / "initial_data.csv", {"x", "u0", "m0"}, {xs, noisy.u0, noisy.m0});
    write_columns_csv(rc.output_dir / "initial_data_clean.csv", {"x", "u0", "m0"}, {xs, clean.u0, clean.m0});
    if (truth) write_ideal_case(rc.output_dir / "ideal_case", *truth);
    out << "wrote initial data for " << to_string(cfg.test) << " to " << rc.output_dir.string() << "\n";
    return ok;
}

} // namespace detail

/// Dispatches a parsed configuration; returns the process exit code.
inline int execute(const RunConfig& rc, std::ostream& out, std::ostream& err) {
    try {
        if (rc.command == "run") return detail::run(rc, out);
        if (rc.command == "sweep") return detail::sweep(rc, out);
        if (rc.command == "check-gradient") return detail::check_gradient_cmd(rc, out);
        if (rc.command == "check-carleman") return detail::check_carleman_cmd(rc, out);
        if (rc.command == "export-case") return detail::export_case(rc, out);
        err << "error: unknown command '" << rc.command << "'\n";
        return usage;
    } catch (const io_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return io;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return io;
    } catch (const numerical_error& e) {
        err << "numerical error: " << e.what() << "\n";
        return numerical;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        err << "numerical error: " << e.what() << "\n";
        return numerical;
    }
}

/// parse_config + execute, with CLI11's help and error handling.
inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    try {
        rc = parse_config(argc, argv);
    } catch (const help_requested& e) {
        out << e.what();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n(run with --help for usage)\n";
        return usage;
    } catch (const usage_error& e) {
        err << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const io_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return io;
    }
    return execute(rc, out, err);
}

} // namespace mfgcvx::cli
