#pragma once

// Internal text-format helpers shared by the file-facing modules: strict
// tab-separated parsing with line-number diagnostics and bit-exact decimal
// formatting of 64-bit reals.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "graphnc/common.hpp"

namespace graphnc::textio {

// Shortest decimal that round-trips a 64-bit real exactly ("%.17g").
inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void strip_carriage_return(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string_view> split_tabs(const std::string& line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.emplace_back(line.data() + start, line.size() - start);
            break;
        }
        fields.emplace_back(line.data() + start, pos - start);
        start = pos + 1;
    }
    return fields;
}

inline std::size_t parse_index(std::string_view field, const std::string& file,
                               std::size_t line_no) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.begin(), field.end(), value);
    if (ec != std::errc{} || ptr != field.end()) {
        throw FormatError(file + " line " + std::to_string(line_no) +
                          ": expected a non-negative integer, got '" +
                          std::string(field) + "'");
    }
    return value;
}

inline double parse_real(std::string_view field, const std::string& file,
                         std::size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.begin(), field.end(), value);
    if (ec != std::errc{} || ptr != field.end()) {
        throw FormatError(file + " line " + std::to_string(line_no) +
                          ": expected a decimal number, got '" + std::string(field) +
                          "'");
    }
    return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace graphnc::textio
