#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "icgkit/error.hpp"

namespace icgkit {

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Plain comma split; the formats used here never quote fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            return out;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline long parse_long(std::string_view s, const std::string& what) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError(what + ": not an integer: '" + std::string(s) + "'");
    }
    return v;
}

inline double parse_double(std::string_view s, const std::string& what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError(what + ": not a number: '" + std::string(s) + "'");
    }
    return v;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline double round_sig(double v, int digits) {
    if (!std::isfinite(v)) return v;
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    double r = 0.0;
    std::from_chars(buf, ptr, r);
    return r;
}

// Fixed 9 significant digits, shortest form of the rounded value.
inline std::string format_sig9(double v) { return format_double(round_sig(v, 9)); }

}  // namespace icgkit
