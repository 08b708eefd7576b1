#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace asm2tv {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Strict full-field parse; throws std::invalid_argument on junk.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace asm2tv
