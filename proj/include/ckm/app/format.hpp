#pragma once

#include <string>

namespace ckm::app {

/// Shortest text that parses back to exactly `v`; "nan" for NaN.
std::string format_double(double v);

}  // namespace ckm::app
