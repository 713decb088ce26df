#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mfgcvx/csv.hpp"
#include "test_support.hpp"

using namespace mfgcvx;

TEST(Csv, FormatRealRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_real(v)), v);
}

TEST(Csv, FieldRoundTripIsExact) {
    const Grid g = make_grid(-1, 1, 1, 0.1, 0.1, 0.6);
    const Field f = field_from_fn(g, [](double x, double t) { return std::exp(t) * std::cos(M_PI * x) / 3.0; });
    std::stringstream ss;
    write_field_csv(ss, f);
    const Field back = read_field_csv(ss, 0.6);
    EXPECT_EQ(back.grid(), g);
    EXPECT_EQ(back, f);
}

TEST(Csv, FileRoundTrip) {
    const auto dir = testutil::scratch_dir();
    const Grid g = make_grid(-1, 1, 2, 0.1, 0.1, 0.5);
    const Field f = field_from_fn(g, [](double x, double t) { return x * t; });
    write_field_csv(dir / "f.csv", f);
    EXPECT_EQ(read_field_csv(dir / "f.csv", 0.5), f);
}

TEST(Csv, Rejections) {
    const auto bad = [](const std::string& text) {
        std::istringstream is(text);
        return read_field_csv(is);
    };
    EXPECT_THROW(bad(""), io_error);
    EXPECT_THROW(bad("a,b,c\n"), io_error);
    EXPECT_THROW(bad("x,t,value\n"), io_error);
    EXPECT_THROW(bad("x,t,value\n0,0\n"), io_error);
    EXPECT_THROW(bad("x,t,value\n0,0,zz\n"), io_error);
    EXPECT_THROW(bad("x,t,value\n0,0,1\n1,0,1\n0,1,1\n"), io_error);
    EXPECT_THROW(bad("x,t,value\n0,0,1\n1,0,1\n0,1,1\n1,1,nan\n"), io_error);
    EXPECT_THROW(read_field_csv(std::filesystem::path("/nonexistent/f.csv")), io_error);
}

TEST(Csv, Columns) {
    const auto dir = testutil::scratch_dir();
    write_columns_csv(dir / "c.csv", {"t", "F"}, {{0.0, 0.5}, {1.0, 0.25}});
    EXPECT_EQ(testutil::slurp(dir / "c.csv"), "t,F\n0,1\n0.5,0.25\n");
    EXPECT_THROW(write_columns_csv(dir / "d.csv", {"t"}, {{0.0}, {1.0}}), std::invalid_argument);
    EXPECT_THROW(write_columns_csv(dir / "d.csv", {"t", "F"}, {{0.0}, {1.0, 2.0}}), std::invalid_argument);
    EXPECT_THROW(write_columns_csv(dir / "missing" / "d.csv", {"t"}, {{0.0}}), io_error);
}
