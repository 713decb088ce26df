#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgcvx/error.hpp"
#include "mfgcvx/grid.hpp"

namespace mfgcvx {

/// Shortest text that reads back to the identical double (17 significant digits).
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes `x,t,value` rows, one time slice after another.
inline void write_field_csv(std::ostream& os, const Field& f) {
    const Grid& g = f.grid();
    os << "x,t,value\n";
    for (std::size_t j = 0; j < g.nt; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            os << format_real(g.x(i)) << ',' << format_real(g.t(j)) << ',' << format_real(f(i, j)) << '\n';
        }
    }
}

inline void write_field_csv(const std::filesystem::path& path, const Field& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path.string() + " for writing");
    write_field_csv(os, f);
    if (!os) throw io_error("write failed for " + path.string());
}

/// Reads the format produced by write_field_csv. The lattice is recovered
/// from the coordinates; `gamma` is not part of the file.
inline Field read_field_csv(std::istream& is, double gamma = 0.6) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("x,t,value", 0) != 0) {
        throw io_error("field csv: missing `x,t,value` header");
    }
    std::vector<double> xs, ts, vs;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
            throw io_error("field csv: malformed row " + std::to_string(lineno));
        }
        try {
            xs.push_back(std::stod(a));
            ts.push_back(std::stod(b));
            vs.push_back(std::stod(c));
        } catch (const std::exception&) {
            throw io_error("field csv: unparsable number on row " + std::to_string(lineno));
        }
    }
    if (xs.empty()) throw io_error("field csv: no data rows");

    std::size_t nx = 0;
    while (nx < ts.size() && ts[nx] == ts[0]) ++nx;
    if (nx < 2 || vs.size() % nx != 0) throw io_error("field csv: rows do not form a rectangular lattice");
    const std::size_t nt = vs.size() / nx;
    if (nt < 2) throw io_error("field csv: need at least two time slices");

    Grid g;
    try {
        const double dx = (xs[nx - 1] - xs.front()) / static_cast<double>(nx - 1);
        const double dt = (ts.back() - ts.front()) / static_cast<double>(nt - 1);
        g = make_grid(xs.front(), xs[nx - 1], ts.back(), dx, dt, gamma);
    } catch (const std::invalid_argument& e) {
        throw io_error(std::string("field csv: ") + e.what());
    }
    if (g.nx != nx || g.nt != nt) throw io_error("field csv: spacing is not uniform");
    for (std::size_t k = 0; k < vs.size(); ++k) {
        const std::size_t i = k % nx, j = k / nx;
        if (std::abs(xs[k] - g.x(i)) > 1e-9 || std::abs(ts[k] - g.t(j)) > 1e-9) {
            throw io_error("field csv: node " + std::to_string(k) + " is off the lattice");
        }
        if (!std::isfinite(vs[k])) throw io_error("field csv: non-finite value at row " + std::to_string(k + 2));
    }
    return Field(g, std::move(vs));
}

inline Field read_field_csv(const std::filesystem::path& path, double gamma = 0.6) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open " + path.string());
    return read_field_csv(is, gamma);
}

/// Writes named columns of equal length as CSV.
inline void write_columns_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size()) throw std::invalid_argument("write_columns_csv: one name per column");
    for (const auto& c : columns) {
        if (c.size() != columns.front().size()) throw std::invalid_argument("write_columns_csv: columns differ in length");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path.string() + " for writing");
    for (std::size_t k = 0; k < names.size(); ++k) os << (k ? "," : "") << names[k];
    os << '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << format_real(columns[k][r]);
        os << '\n';
    }
    if (!os) throw io_error("write failed for " + path.string());
}

} // namespace mfgcvx
