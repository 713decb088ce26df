#include <cmath>

#include <gtest/gtest.h>

#include "mfgcvx/report_io.hpp"
#include "test_support.hpp"

using namespace mfgcvx;

TEST(ReportIo, IdealCaseRoundTrip) {
    const auto dir = testutil::scratch_dir();
    const IdealCase c = build_problem(default_config(TestId::T1_2)).second.value();
    write_ideal_case(dir / "case", c);
    const IdealCase back = read_ideal_case(dir / "case");
    EXPECT_EQ(back.u_true, c.u_true);
    EXPECT_EQ(back.m_true, c.m_true);
    EXPECT_EQ(back.f, c.f);
    EXPECT_EQ(back.spec.r, c.spec.r);
    EXPECT_EQ(back.spec.u0, c.spec.u0);
    EXPECT_EQ(back.spec.m0, c.spec.m0);
    EXPECT_EQ(back.spec.kernel.c0, 1.0);
    EXPECT_EQ(back.source, "T1_2");
    EXPECT_EQ(back.l2_residual, c.l2_residual);
    EXPECT_EQ(back.l2_bound, c.l2_bound);
}

TEST(ReportIo, IdealCaseErrors) {
    const auto dir = testutil::scratch_dir();
    EXPECT_THROW(read_ideal_case(dir / "missing"), io_error);
    const IdealCase c = build_problem(default_config(TestId::T1_2)).second.value();
    write_ideal_case(dir / "case", c);
    write_text(dir / "case" / "ideal_case.json", "{\"gamma\": 0.6}");
    EXPECT_THROW(read_ideal_case(dir / "case"), io_error);
    write_text(dir / "case" / "ideal_case.json", "not json");
    EXPECT_THROW(read_ideal_case(dir / "case"), io_error);
}

TEST(ReportIo, ConfigTextListsEveryKey) {
    const ExperimentConfig c = default_config(TestId::T2_1);
    const std::string text = config_text(c);
    for (const auto& [k, v] : config_entries(c)) EXPECT_NE(text.find(k + " = " + v + "\n"), std::string::npos);
    EXPECT_EQ(config_json(c)["test"], "T2_1");
}

TEST(ReportIo, NonFiniteBecomesNull) {
    EXPECT_TRUE(real(NAN).is_null());
    EXPECT_TRUE(real(INFINITY).is_null());
    EXPECT_EQ(real(1.5).get<double>(), 1.5);
}

TEST(ReportIo, CostStatsWindows) {
    const std::vector<double> t{0, 0.1, 0.2, 0.3, 0.6, 1.0, 1.5, 2.0};
    const std::vector<double> f{9, 4, 6, 1, 2, 3, 50, 80};
    const CostStats s = cost_stats(t, f);
    EXPECT_EQ(s.mean_early, 5.0);
    EXPECT_EQ(s.mean_mid, 2.0);
    EXPECT_EQ(s.min_mid, 1.0);
    EXPECT_EQ(s.max_late, 80.0);
    EXPECT_EQ(s.min, 1.0);
    EXPECT_EQ(s.max, 80.0);
}

TEST(ReportIo, SliceIndices) {
    EXPECT_EQ(slice_indices(make_grid(-1, 1, 1, 0.1, 0.1)), (std::vector<std::size_t>{0, 6, 10}));
    EXPECT_EQ(slice_indices(make_grid(-1, 1, 2, 0.1, 0.1, 0.5)), (std::vector<std::size_t>{0, 6, 10, 12, 16, 20}));
}

TEST(ReportIo, RunReportFilesAndDeterminism) {
    const auto dir = testutil::scratch_dir();
    const RunReport r = run_test(TestId::T1_2);
    write_run_report(dir / "a", r);
    write_run_report(dir / "b", run_test(TestId::T1_2));
    for (const char* f : {"config.txt", "summary.json", "u.csv", "m.csv", "u_true.csv", "m_true.csv", "f.csv",
                          "initial_data.csv", "rel_cost.csv", "errors.csv", "slices.csv", "trace.csv"}) {
        ASSERT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
        EXPECT_EQ(testutil::slurp(dir / "a" / f), testutil::slurp(dir / "b" / f)) << f;
    }
    EXPECT_EQ(read_field_csv(dir / "a" / "u.csv"), r.predicted.u);
    const json s = read_json(dir / "a" / "summary.json");
    EXPECT_EQ(s["status"], "converged");
    EXPECT_EQ(s["iterations"].get<std::size_t>(), r.iterations);
    EXPECT_TRUE(s.contains("errors"));
    EXPECT_EQ(testutil::slurp(dir / "a" / "trace.csv").substr(0, 45), "iter,j1,j2,j3,total,grad_norm,optimality,step");
}

TEST(ReportIo, UnwritableDirectory) {
    const auto dir = testutil::scratch_dir();
    write_text(dir / "file", "x");
    EXPECT_THROW(ensure_dir(dir / "file" / "sub"), io_error);
    EXPECT_THROW(write_text(dir / "nope" / "x.txt", "x"), io_error);
}
