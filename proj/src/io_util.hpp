#pragma once

// Shared helpers for the versioned artifact files (text header, "---",
// little-endian float64 payload).

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stpinn::io {

inline void write_f64_le(std::ostream& out, std::span<const double> values) {
    std::vector<unsigned char> buf(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) {
            buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
        }
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<double> read_f64_le(std::istream& in, std::size_t count) {
    std::vector<unsigned char> buf(count * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
        throw std::runtime_error("truncated float64 payload: expected " +
                                 std::to_string(count) + " values");
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t{buf[i * 8 + b]} << (8 * b);
        values[i] = std::bit_cast<double>(bits);
    }
    return values;
}

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_double(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("invalid number for " + what + ": '" + text + "'");
    }
    if (used != text.size()) {
        throw std::runtime_error("invalid number for " + what + ": '" + text + "'");
    }
    return v;
}

inline long long parse_int(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("invalid integer for " + what + ": '" + text + "'");
    }
    if (used != text.size()) {
        throw std::runtime_error("invalid integer for " + what + ": '" + text + "'");
    }
    return v;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace stpinn::io
