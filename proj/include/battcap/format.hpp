#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace battcap {

inline constexpr int kSignificantDigits = 12;

/// Text form used for every number the tools write: `%.12g`.
inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", kSignificantDigits, x);
    return buf;
}

/// Rounds to 12 significant digits so JSON emitters print short, stable text.
inline double round_significant(double x) {
    if (!std::isfinite(x) || x == 0.0) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", kSignificantDigits, x);
    return std::strtod(buf, nullptr);
}

}  // namespace battcap
