#include "ckm/observation.hpp"

#include <cmath>
#include <string>

#include "ckm/error.hpp"

namespace ckm {

void validate_observations(std::span<const Observation> data) {
  if (data.empty()) return;
  const std::size_t k = data.front().z.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data[i];
    const std::string where = " (observation " + std::to_string(i) + ")";
    if (!std::isfinite(o.w) || o.w < 0.0) {
      throw Error(ErrorCode::NegativeTime, "time must be finite and >= 0" + where);
    }
    if (o.delta != 0 && o.delta != 1) {
      throw Error(ErrorCode::NonBinaryIndicator, "delta must be 0 or 1" + where);
    }
    if (o.eta && *o.eta != 0 && *o.eta != 1) {
      throw Error(ErrorCode::NonBinaryIndicator, "eta must be 0 or 1" + where);
    }
    if (o.eta && *o.eta > o.delta) {
      throw Error(ErrorCode::InvalidArgument,
                  "eta = 1 on a censored observation" + where);
    }
    if (o.z.size() != k) {
      throw Error(ErrorCode::RaggedCovariates, "covariate dimension differs" + where);
    }
    for (double v : o.z) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::MalformedValue, "non-finite covariate" + where);
      }
    }
  }
}

std::size_t covariate_dimension(std::span<const Observation> data) {
  return data.empty() ? 0 : data.front().z.size();
}

}  // namespace ckm
