#pragma once

#include <charconv>
#include <optional>
#include <string>

namespace hamgrad {

/// Shortest representation that round-trips; integral values keep a ".0".
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eninf") == std::string::npos) s += ".0";
    return s;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

} // namespace hamgrad
