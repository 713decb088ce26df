// Forecasts Test 1.1 from noisy initial data and prints the recovery errors
// and the relative cost at each time node.

#include <cstdio>

#include "mfgcvx/mfgcvx.hpp"

int main() {
    using namespace mfgcvx;

    ExperimentConfig cfg = default_config(TestId::T1_1);
    cfg.noise = 0.03;

    const RunReport r = run_test(cfg);
    std::printf("status %s after %zu iterations (optimality %.3g)\n", to_string(r.status), r.iterations, r.optimality);
    if (r.errors) std::printf("H10 error on t <= 0.6:  u %.4f  m %.4f\n", r.errors->h10_u, r.errors->h10_m);
    for (std::size_t j = 0; j < r.times.size(); ++j) std::printf("t = %.1f  F = %.4g\n", r.times[j], r.rel_cost[j]);
    return r.converged() ? 0 : 1;
}
