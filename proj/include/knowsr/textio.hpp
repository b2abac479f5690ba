#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

#include "knowsr/errors.hpp"

namespace knowsr {

/// Decimal form with enough digits that parsing recovers the identical
/// double; used everywhere a file must round-trip or byte-compare.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("parse_double: bad value '" + s + "'");
    return v;
}

} // namespace knowsr
