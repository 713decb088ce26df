#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "mfgcvx/experiments.hpp"
#include "mfgcvx/mfg_model.hpp"

using namespace mfgcvx;

namespace {

Grid paper_grid() { return make_grid(-1, 1, 1, 0.1, 0.1, 0.6); }

ProblemSpec plain_problem(const Grid& g, double k = 1.0) {
    return make_problem(g, KernelSpec::constant(k), std::vector<double>(g.nx, 0.0), std::vector<double>(g.nx, 0.5));
}

double sup(const Field& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

} // namespace

TEST(KernelTerm, ConstantKernelTimesMass) {
    const Grid g = paper_grid();
    const Field m(g, 0.5);
    for (double v : kernel_term(m, KernelSpec::constant(1.0), 3)) EXPECT_NEAR(v, 1.0, 1e-14);
    for (double v : kernel_term(m, KernelSpec::constant(-1.0), 3)) EXPECT_NEAR(v, -1.0, 1e-14);
    EXPECT_THROW(kernel_term(m, KernelSpec::constant(1.0), g.nt), std::out_of_range);
}

TEST(KernelTerm, NormalisedBumpHasUnitMass) {
    const Grid g = paper_grid();
    const auto m0 = sample_x(g, [](double x) { return initial_data::compact_bump(x, 0.0); });
    const Field m = extend_constant_in_time(g, m0);
    for (double v : kernel_term(m, KernelSpec::constant(1.0), 0)) EXPECT_NEAR(v, 1.0, 0.01);
}

TEST(KernelTerm, TabulatedMatchesConstant) {
    const Grid g = paper_grid();
    const Field m = field_from_fn(g, [](double x, double t) { return 1 + x * t; });
    const auto a = kernel_term(m, KernelSpec::constant(2.0), 5);
    const auto b = kernel_term(m, KernelSpec::tabulate(g, [](double, double) { return 2.0; }), 5);
    for (std::size_t i = 0; i < g.nx; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(KernelTerm, TransposeIsAdjoint) {
    const Grid g = paper_grid();
    const KernelSpec k = KernelSpec::tabulate(g, [](double x, double y) { return std::exp(-(x - y) * (x - y)); });
    const Field m = field_from_fn(g, [](double x, double t) { return std::cos(3 * x) + t; });
    const Field a = field_from_fn(g, [](double x, double t) { return x * x - t; });
    EXPECT_NEAR(dot(kernel_term_field(m, k), a), dot(m, kernel_term_transpose(a, k)), 1e-12);
}

TEST(ResidualL1, ZeroStateGivesZero) {
    const Grid g = paper_grid();
    const ProblemSpec p = plain_problem(g);
    for (const Field f = residual_l1(Field(g), Field(g), p); double v : f.values()) EXPECT_EQ(v, 0.0);
}

TEST(ResidualL1, KernelTermOnly) {
    const Grid g = paper_grid();
    const ProblemSpec p = plain_problem(g);
    for (const Field f = residual_l1(Field(g), Field(g, 0.5), p); double v : f.values()) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(ResidualL1, ShapeMismatchRejected) {
    const ProblemSpec p = plain_problem(paper_grid());
    const Field other(make_grid(-1, 1, 2, 0.1, 0.1));
    EXPECT_THROW(residual_l1(other, other, p), std::invalid_argument);
    EXPECT_THROW(residual_l2(other, other, p), std::invalid_argument);
}

TEST(ResidualL2, ConstantsGiveZero) {
    const Grid g = paper_grid();
    const ProblemSpec p = plain_problem(g);
    for (const Field f = residual_l2(Field(g, 3.0), Field(g, 0.5), p); double v : f.values()) EXPECT_NEAR(v, 0.0, 1e-13);
}

TEST(ResidualL2, SeparableDensityWithoutDrift) {
    const Grid g = paper_grid();
    const ProblemSpec p = plain_problem(g);
    const Field m = field_from_fn(g, [](double x, double t) { return std::exp(t) * std::cos(M_PI * x); });
    const Field res = residual_l2(Field(g), m, p);
    // central-difference truncation: dt^2 / 6 |m_ttt| + dx^2 / 12 |m_xxxx|
    const double bound = std::exp(1.0) * (g.dt * g.dt / 6.0 + g.dx * g.dx / 12.0 * std::pow(M_PI, 4));
    for (std::size_t j = 1; j + 1 < g.nt; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double exact = std::exp(g.t(j)) * (1 + M_PI * M_PI) * std::cos(M_PI * g.x(i));
            EXPECT_LT(std::abs(res(i, j) - exact), bound) << "i=" << i << " j=" << j;
        }
}

TEST(FokkerPlanck, ConstantDensityIsSteady) {
    const Grid g = paper_grid();
    const ProblemSpec p = plain_problem(g);
    const Field m = solve_fokker_planck(Field(g), p.m0, p);
    for (double v : m.values()) EXPECT_NEAR(v, 0.5, 1e-14);
}

TEST(FokkerPlanck, ConservesMass) {
    const Grid g = paper_grid();
    for (const SpaceTimeFn& uf : {SpaceTimeFn(initial_data::u_quartic), SpaceTimeFn(initial_data::u_cosine)}) {
        const Field u = field_from_fn(g, uf);
        const auto m0 = sample_x(g, initial_data::bump_plus_floor);
        const ProblemSpec p = make_problem(g, KernelSpec::constant(1), slice_at_time(u, 0), m0);
        const Field m = solve_fokker_planck(u, m0, p);
        const double mass0 = integrate_x(g, m0);
        for (std::size_t j = 0; j < g.nt; ++j) EXPECT_NEAR(integrate_x(g, m.slice(j)), mass0, 1e-10);
    }
}

TEST(FokkerPlanck, FirstOrderInTime) {
    std::vector<std::vector<double>> finals;
    for (double dt : {0.1, 0.05, 0.025}) {
        const Grid g = make_grid(-1, 1, 1, 0.1, dt, 0.6);
        const Field u = field_from_fn(g, initial_data::u_quartic);
        const auto m0 = sample_x(g, initial_data::bump_plus_floor);
        const ProblemSpec p = make_problem(g, KernelSpec::constant(1), slice_at_time(u, 0), m0);
        finals.push_back(slice_at_time(solve_fokker_planck(u, m0, p), g.nt - 1));
    }
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t i = 0; i < finals[0].size(); ++i) {
        e1 = std::max(e1, std::abs(finals[0][i] - finals[1][i]));
        e2 = std::max(e2, std::abs(finals[1][i] - finals[2][i]));
    }
    EXPECT_NEAR(e1 / e2, 2.0, 0.3);
}

TEST(FokkerPlanck, RejectsNonFiniteInput) {
    const Grid g = paper_grid();
    const ProblemSpec p = plain_problem(g);
    std::vector<double> m0(g.nx, 0.5);
    m0[3] = NAN;
    EXPECT_THROW(solve_fokker_planck(Field(g), m0, p), std::invalid_argument);
    Field u(g);
    u(2, 2) = INFINITY;
    EXPECT_THROW(solve_fokker_planck(u, p.m0, p), std::invalid_argument);
}

TEST(ManufacturedF, ConstantCase) {
    const Grid g = paper_grid();
    for (const Field f = manufactured_f(Field(g), Field(g, 0.5), KernelSpec::constant(1.0)); double v : f.values()) EXPECT_NEAR(v, -2.0, 1e-14);
}

TEST(ManufacturedF, ResidualVanishesIdentically) {
    const Grid g = paper_grid();
    const Field u = field_from_fn(g, [](double x, double t) { return std::cos(M_PI * x) * std::exp(-t) + x * x * t; });
    const Field m = field_from_fn(g, [](double x, double t) { return 2 + std::sin(x + t); });
    ProblemSpec p = plain_problem(g);
    p.f = manufactured_f(u, m, p.kernel);
    EXPECT_LT(sup(residual_l1(u, m, p)), 1e-12);
}

TEST(ManufacturedF, RejectsVanishingDensity) {
    const Grid g = paper_grid();
    Field m(g, 0.5);
    m(4, 6) = 0.0;
    try {
        (void)manufactured_f(Field(g), m, KernelSpec::constant(1.0));
        FAIL() << "expected rejection";
    } catch (const numerical_error& e) {
        EXPECT_NE(std::string(e.what()).find("min 0"), std::string::npos) << e.what();
    }
}

TEST(IdealCase, QuarticWithBumpDensity) {
    const Grid g = paper_grid();
    const IdealCase c = build_ideal_case(initial_data::u_quartic, initial_data::bump_plus_floor, KernelSpec::constant(1), g, "T1_1");
    EXPECT_LT(c.l1_residual, 1e-12);
    EXPECT_LT(c.l2_residual, c.l2_bound);
    EXPECT_DOUBLE_EQ(c.l2_bound, kSchemeMismatchConstant * (g.dt + g.dx * g.dx));
    EXPECT_NEAR(c.l2_residual, 0.532155, 1e-6);
    for (double v : c.m_true.values()) EXPECT_GT(v, 0.0);
    EXPECT_EQ(c.spec.u0, slice_at_time(c.u_true, 0));
    EXPECT_EQ(c.spec.m0, slice_at_time(c.m_true, 0));
    EXPECT_EQ(c.source, "T1_1");
}

TEST(IdealCase, CosineWithFlatDensity) {
    const Grid g = paper_grid();
    const IdealCase c = build_ideal_case(initial_data::u_cosine, [](double) { return 0.5; }, KernelSpec::constant(1), g);
    EXPECT_LT(c.l1_residual, 1e-12);
    EXPECT_LT(c.l2_residual, c.l2_bound);
    EXPECT_NEAR(c.l2_residual, 0.291622, 1e-6);
}

TEST(IdealCase, RejectsWallSlope) {
    EXPECT_THROW(build_ideal_case([](double x, double t) { return x * t; }, [](double) { return 0.5; },
                                  KernelSpec::constant(1), paper_grid()),
                 std::invalid_argument);
}

TEST(IdealCase, RejectsDensityWithoutFloor) {
    EXPECT_THROW(build_ideal_case(initial_data::u_quartic,
                                  [](double x) { return std::abs(x) < 1 ? std::exp(1 / (x * x - 1)) : 0.0; },
                                  KernelSpec::constant(1), paper_grid()),
                 numerical_error);
}

TEST(Problem, Validation) {
    const Grid g = paper_grid();
    EXPECT_THROW(make_problem(g, KernelSpec::constant(1), std::vector<double>(3), std::vector<double>(g.nx)), std::invalid_argument);
    std::vector<double> bad(g.nx, 0.5);
    bad[0] = NAN;
    EXPECT_THROW(make_problem(g, KernelSpec::constant(1), std::vector<double>(g.nx), bad), std::invalid_argument);
    EXPECT_THROW(KernelSpec::constant(INFINITY), std::invalid_argument);
    EXPECT_NO_THROW(validate_density(g, std::vector<double>(g.nx, 0.5)));
    EXPECT_THROW(validate_density(g, std::vector<double>(g.nx, 0.7)), std::invalid_argument);
    std::vector<double> neg(g.nx, 0.5);
    neg[2] = -0.1;
    EXPECT_THROW(validate_density(g, neg), std::invalid_argument);
}
