#include "ckm/app/format.hpp"

#include <charconv>
#include <cmath>

namespace ckm::app {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace ckm::app
