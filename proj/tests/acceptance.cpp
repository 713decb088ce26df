// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// usage: acceptance [output_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfgcvx/cli.hpp"
#include "mfgcvx/mfgcvx.hpp"

using namespace mfgcvx;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::vector<double> kLambdas{2, 3, 4, 5, 10, 20, 30, 40, 50};
constexpr std::uint64_t kCarlemanSeed = 1;
constexpr std::size_t kCarlemanSamples = 100;

ProblemSpec noisy_spec(const ExperimentConfig& cfg) {
    ProblemSpec spec = build_problem(cfg).first;
    perturb_initial_data(spec, cfg);
    return spec;
}

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = default_config(TestId::T1_1);
    const ProblemSpec spec = noisy_spec(cfg);
    const Objective obj(spec, cfg.params());
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int s = 0; s < 10; ++s) {
        const StatePair x = random_smooth_state(spec, rng);
        const StatePair grad = obj.gradient(x);
        double xmax = 0.0;
        for (std::size_t k = 0; k < x.u.size(); ++k) xmax = std::max({xmax, std::abs(x.u.values()[k]), std::abs(x.m.values()[k])});
        const double h = 1e-6 * (1.0 + xmax);
        for (int d = 0; d < 50; ++d) {
            StatePair v{Field(spec.grid), Field(spec.grid), x.mask};
            for (std::size_t k = 0; k < v.u.size(); ++k) {
                v.u.values()[k] = normal(rng);
                v.m.values()[k] = normal(rng);
            }
            apply_mask(v);
            StatePair p = x, q = x;
            axpy(p, h, v);
            axpy(q, -h, v);
            const double fd = (obj.eval(p).total - obj.eval(q).total) / (2.0 * h);
            const double an = dot(grad, v);
            worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-300));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 1e-6 && secs < 60.0,
            fmt("max relative error %.3g over 10 states x 50 directions (h = 1e-6 (1 + max|x|)), %.2f s", worst, secs)};
}

Outcome mass_conservation() {
    const ExperimentConfig cfg = default_config(TestId::T1_1);
    const Grid g = cfg.grid();
    const Field u = field_from_fn(g, initial_data::u_quartic);
    const auto m0 = sample_x(g, initial_data::bump_plus_floor);
    const ProblemSpec p = make_problem(g, KernelSpec::constant(cfg.kernel), slice_at_time(u, 0), m0);
    const Field m = solve_fokker_planck(u, m0, p);
    const double mass0 = integrate_x(g, m0);
    double worst = 0.0;
    for (std::size_t j = 0; j < g.nt; ++j) worst = std::max(worst, std::abs(integrate_x(g, m.slice(j)) - mass0));
    return {worst < 1e-8, fmt("max |mass(t) - mass(0)| = %.3g over %zu time nodes (mass %.6f)", worst, g.nt, mass0)};
}

Outcome manufactured_identity() {
    // Recorded at grid step 0.1.
    const double recorded[] = {0.532155, 0.291622};
    bool ok = true;
    std::string detail;
    int k = 0;
    for (TestId id : {TestId::T1_1, TestId::T1_2}) {
        const IdealCase c = build_problem(default_config(id)).second.value();
        const bool good = c.l1_residual < 1e-12 && c.l2_residual < c.l2_bound && std::abs(c.l2_residual - recorded[k]) < 1e-6;
        ok = ok && good;
        detail += fmt("%s: |L1| = %.2g, |L2| = %.6f (bound %.3f, recorded %.6f); ", to_string(id), c.l1_residual,
                      c.l2_residual, c.l2_bound, recorded[k]);
        ++k;
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome paper_convergence() {
    bool ok = true;
    std::string detail;
    for (TestId id : {TestId::T1_1, TestId::T1_2, TestId::T2_1, TestId::T2_2, TestId::T3_1}) {
        const RunReport r = run_test(id);
        ok = ok && r.converged() && r.optimality < 1e-5;
        detail += fmt("%s %s in %zu it (opt %.2g); ", to_string(id), to_string(r.status), r.iterations, r.optimality);
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome recovery_trend() {
    const double levels[] = {0.0, 0.015, 0.03, 0.06};
    std::vector<double> eu, em;
    double residual_scale = 0.0;
    for (double level : levels) {
        ExperimentConfig cfg = default_config(TestId::T1_1);
        cfg.noise = level;
        const RunReport r = run_test(cfg);
        eu.push_back(r.errors->h10_u);
        em.push_back(r.errors->h10_m);
        residual_scale = r.truth->l2_residual;
    }
    bool ok = eu[0] < 10 * residual_scale && em[0] < 10 * residual_scale;
    for (std::size_t k = 1; k < eu.size(); ++k) ok = ok && eu[k] >= eu[k - 1] && em[k] >= em[k - 1];
    return {ok, fmt("u errors %.3f %.3f %.3f %.3f; m errors %.3f %.3f %.3f %.3f (noise 0, 1.5, 3, 6 %%); "
                    "zero-noise bound 10 x %.3f",
                    eu[0], eu[1], eu[2], eu[3], em[0], em[1], em[2], em[3], residual_scale)};
}

Outcome extended_blow_up() {
    const RunReport r = run_test(TestId::T1_1_extended);
    const CostStats s = cost_stats(r.times, r.rel_cost);
    const bool ok = r.converged() && s.max_late >= 5.0 * s.mean_mid && s.min_mid < s.mean_early;
    return {ok, fmt("max F on (1,2] = %.3g, mean F on [0.3,1] = %.3g (ratio %.1f); min F on [0.3,1] = %.3g < mean F on "
                    "(0,0.3) = %.3g",
                    s.max_late, s.mean_mid, s.max_late / s.mean_mid, s.min_mid, s.mean_early)};
}

struct CarlemanThresholds {
    LambdaSweep carleman;
    LambdaSweep quasi;
};

CarlemanThresholds carleman_sweeps() {
    const ExperimentConfig cfg = default_config(TestId::T1_1);
    const auto [spec, truth] = build_problem(cfg);
    const Grid& g = spec.grid;
    Field gm = truth->m_true;
    for (std::size_t k = 0; k < gm.size(); ++k) gm.values()[k] *= spec.r.values()[k];
    CarlemanThresholds out;
    out.carleman = sweep_lambda(kLambdas, [&](double l) { return check_carleman_estimate(kCarlemanSamples, l, 3.0, g, kCarlemanSeed); });
    out.quasi = sweep_lambda(kLambdas, [&](double l) { return check_quasi_carleman(kCarlemanSamples, gm, l, 3.0, g, kCarlemanSeed); });
    return out;
}

Outcome carleman_verification(const CarlemanThresholds& t) {
    // Recorded thresholds and fitted constants at the threshold (seed 1, 100 samples, T = 1, c = 3).
    const double recorded_lambda = 2.0, recorded_c1 = 3.07577, recorded_c2 = 0.0;
    if (!t.carleman.threshold || !t.quasi.threshold) return {false, "no passing lambda up to 50"};
    const auto& ce = t.carleman.reports[static_cast<std::size_t>(
        std::find(kLambdas.begin(), kLambdas.end(), *t.carleman.threshold) - kLambdas.begin())];
    const auto& qc = t.quasi.reports[static_cast<std::size_t>(
        std::find(kLambdas.begin(), kLambdas.end(), *t.quasi.threshold) - kLambdas.begin())];
    const bool ok = ce.fitted_C > 0.0 && ce.min_gap >= 0.0 && qc.min_gap >= 0.0 && *t.carleman.threshold == recorded_lambda &&
                    *t.quasi.threshold == recorded_lambda && std::abs(ce.fitted_C - recorded_c1) < 1e-4 &&
                    qc.fitted_C == recorded_c2;
    return {ok, fmt("Carleman passes from lambda = %g (C1 = %.5f, min_gap %.3g, %zu of %zu samples constrain); "
                    "quasi-Carleman (g = r m_true) from lambda = %g (C2 = %.3g, min_gap %.3g)",
                    *t.carleman.threshold, ce.fitted_C, ce.min_gap, ce.constrained, ce.samples, *t.quasi.threshold,
                    qc.fitted_C, qc.min_gap)};
}

Outcome convexity(const CarlemanThresholds& t) {
    if (!t.carleman.threshold) return {false, "no empirical lambda from the Carleman sweep"};
    const ExperimentConfig cfg = default_config(TestId::T1_1);
    const ProblemSpec spec = noisy_spec(cfg);
    const auto truth = build_problem(cfg).second.value();
    const double radius = 1.25 * std::max(norm_h2_pair(make_start(spec)),
                                          norm_h2_pair(StatePair{truth.u_true, truth.m_true, initial_plane_mask(spec.grid)}));

    ConvexParams strong = cfg.params();
    strong.lambda = *t.carleman.threshold;
    strong.alpha = alpha_min(strong.lambda, strong.c, strong.a);
    const ConvexParams paper = cfg.params();

    std::mt19937_64 rng(77);
    double worst_strong = INFINITY, worst_paper = INFINITY, max_norm = 0.0;
    for (int k = 0; k < 100; ++k) {
        const StatePair a = random_smooth_state(spec, rng, 0.5), b = random_smooth_state(spec, rng, 0.5);
        max_norm = std::max({max_norm, norm_h2_pair(a), norm_h2_pair(b)});
        const ConvexityProbe ps = convexity_probe(a, b, strong, spec);
        worst_strong = std::min(worst_strong, ps.gap - (ps.floor - 1e-10));
        worst_paper = std::min(worst_paper, convexity_probe(a, b, paper, spec).gap);
    }
    const bool ok = worst_strong >= 0.0 && worst_paper >= 0.0 && max_norm <= radius;
    return {ok, fmt("lambda %g, alpha %.4f: min(gap - alpha/2 |D|^2) = %.3g; lambda 2, alpha 1e-5: min gap = %.3g; "
                    "100 pairs, max H2 norm %.1f within radius %.1f",
                    strong.lambda, strong.alpha, worst_strong, worst_paper, max_norm, radius)};
}

Outcome kernel_similarity() {
    const KernelComparison k = compare_kernels(default_config(TestId::kernel_compare));
    return {k.similar, fmt("K = +1 %s, K = -1 %s, max pointwise F ratio on [0.3,1] = %.3f", to_string(k.plus.status),
                           to_string(k.minus.status), k.max_ratio)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Outcome reproducibility(const std::filesystem::path& root) {
    const std::vector<std::vector<std::string>> commands{
        {"run", "--test", "T1_1"},
        {"run", "--test", "T1_1_extended"},
        {"run", "--test", "kernel_compare"},
        {"sweep", "--test", "T1_1", "--param", "noise", "--values", "0,0.015,0.03,0.06"},
        {"check-carleman", "--test", "T1_1"},
        {"check-gradient", "--test", "T1_1"},
    };
    std::size_t files = 0, differing = 0;
    for (std::size_t c = 0; c < commands.size(); ++c) {
        std::filesystem::path dirs[2];
        for (int rep = 0; rep < 2; ++rep) {
            dirs[rep] = root / ("cmd" + std::to_string(c)) / (rep ? "b" : "a");
            std::filesystem::remove_all(dirs[rep]);
            std::vector<std::string> args{"mfgcvx"};
            args.insert(args.end(), commands[c].begin(), commands[c].end());
            args.push_back("--output");
            args.push_back(dirs[rep].string());
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            if (cli::main(static_cast<int>(argv.size()), argv.data(), out, err) != cli::ok) {
                return {false, "command " + std::to_string(c) + " failed: " + err.str()};
            }
        }
        for (const auto& e : std::filesystem::recursive_directory_iterator(dirs[0])) {
            if (!e.is_regular_file()) continue;
            ++files;
            const auto other = dirs[1] / std::filesystem::relative(e.path(), dirs[0]);
            if (!std::filesystem::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
        }
    }
    return {differing == 0 && files > 0, fmt("%zu output files from %zu commands compared byte for byte, %zu differ", files,
                                             commands.size(), differing)};
}

} // namespace

int main(int argc, char** argv) {
    const std::filesystem::path root = argc > 1 ? argv[1] : "acceptance_out";
    std::filesystem::create_directories(root);

    int failures = 0;
    const auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "gradient correctness", gradient_correctness);
    report(2, "mass conservation", mass_conservation);
    report(3, "manufactured-solution identity", manufactured_identity);
    report(4, "paper-parameter convergence", paper_convergence);
    report(5, "ideal-case recovery trend", recovery_trend);
    report(6, "extended-time blow-up shape", extended_blow_up);
    CarlemanThresholds thresholds;
    report(7, "Carleman estimate verification", [&] {
        thresholds = carleman_sweeps();
        return carleman_verification(thresholds);
    });
    report(8, "convexity probe", [&] { return convexity(thresholds); });
    report(9, "kernel-sign similarity", kernel_similarity);
    report(10, "reproducibility", [&] { return reproducibility(root); });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures ? 1 : 0;
}
