#pragma once

#include <cstdio>
#include <string>

namespace eflux {

// Round-trippable decimal text; identical bits give identical text.
inline std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace eflux
