#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eocav/dynamics.hpp"
#include "eocav/spectrum.hpp"
#include "eocav/util.hpp"
#include "eocav/version.hpp"

// CSV writers and a reader. All floating-point values are rendered with
// %.17g so a given simulation result always serializes to identical bytes.

namespace eocav {

struct CsvMeta {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<std::string> extra;  // additional "key=value" comment entries
};

namespace detail {

inline std::string fmt_g(double x) { return str_printf("%.17g", x); }

inline void write_meta(std::ostream& os, const CsvMeta& meta) {
    os << "# eocav " << kVersion << "\n";
    os << str_printf("# config_hash=0x%016llx\n",
                     static_cast<unsigned long long>(meta.config_hash));
    if (meta.has_seed)
        os << str_printf("# seed=%llu\n", static_cast<unsigned long long>(meta.seed));
    for (const auto& e : meta.extra) os << "# " << e << "\n";
}

}  // namespace detail

inline void write_trace_csv(const std::string& path, const Trace& tr,
                            const CsvMeta& meta) {
    std::ostringstream os;
    detail::write_meta(os, meta);
    os << "t_us,delta_ghz,population,flux_cavity_per_s,flux_free_per_s\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        os << detail::fmt_g(tr.t_s[i] * 1e6) << ',' << detail::fmt_g(tr.delta_hz[i] * 1e-9)
           << ',' << detail::fmt_g(tr.population[i]) << ','
           << detail::fmt_g(tr.flux_cavity_per_s[i]) << ','
           << detail::fmt_g(tr.flux_free_per_s[i]) << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot open output file: " + path);
    f << os.str();
}

inline void write_spectrum_csv(const std::string& path, const Spectrum& s,
                               const std::string& value_column, const CsvMeta& meta) {
    std::ostringstream os;
    detail::write_meta(os, meta);
    os << "f_ghz," << value_column << "\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        os << detail::fmt_g(s.f_hz[i] * 1e-9) << ',' << detail::fmt_g(s.v[i]) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot open output file: " + path);
    f << os.str();
}

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // data[col][row]

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return data[i];
        throw validation_error("csv: no column named " + name);
    }
    bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
    std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw validation_error("cannot open input file: " + path);
    CsvTable t;
    std::string line;
    bool header_done = false;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!header_done) {
            t.columns = cells;
            t.data.assign(cells.size(), {});
            header_done = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw validation_error(
                str_printf("csv: line %zu has %zu cells, expected %zu", lineno,
                           cells.size(), t.columns.size()));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cells[i], &pos);
                if (pos != cells[i].size())
                    throw validation_error("");
                t.data[i].push_back(v);
            } catch (...) {
                throw validation_error(str_printf(
                    "csv: line %zu, column %zu is not numeric: '%s'", lineno, i + 1,
                    cells[i].c_str()));
            }
        }
    }
    if (!header_done) throw validation_error("csv: file has no header row: " + path);
    return t;
}

}  // namespace eocav
