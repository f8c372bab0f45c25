#pragma once

#include <cstdio>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"

namespace syncmargin {

/// One CSV field. monostate is written as an empty field (used for undefined margins).
using Cell = std::variant<std::monostate, double, std::int64_t, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return c;
        throw ParameterError("no column named '" + name + "'");
    }
};

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Cell& c) {
    struct Visitor {
        std::string operator()(std::monostate) const { return {}; }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, c);
}

/// CSV with LF line endings and 17 significant digits. Each comment line is
/// prefixed with "# " ahead of the header row.
inline void write_csv(std::ostream& os, const Table& t, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << '\n';
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_cell(row[c]);
        os << '\n';
    }
}

inline void write_csv_file(const std::string& path, const Table& t, const std::vector<std::string>& comments = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    write_csv(os, t, comments);
}

inline double cell_as_double(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    throw ParameterError("cell is not numeric");
}

} // namespace syncmargin
