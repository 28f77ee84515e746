#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace mulo {

// Shortest round-trip representation, so CSVs are exact and byte-stable.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline const char* format_bool(bool b) { return b ? "true" : "false"; }

}  // namespace mulo
