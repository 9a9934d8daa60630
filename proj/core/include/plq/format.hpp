#pragma once

#include <cstdio>
#include <string>

namespace plq {

/// Decimal text with 9 significant digits; used wherever numbers cross a
/// file boundary.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace plq
