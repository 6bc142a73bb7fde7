#pragma once

#include <optional>
#include <span>
#include <vector>

namespace ckm {

/// One subject: observed time, naive event indicator, covariates and an
/// optional expert judgment of whether the recorded event is genuine.
struct Observation {
  double w = 0.0;
  int delta = 0;
  std::vector<double> z;
  std::optional<int> eta;
};

/// Throws on the first violation of: w >= 0 and finite, delta and eta binary,
/// eta <= delta, and a common covariate dimension.
void validate_observations(std::span<const Observation> data);

/// Covariate dimension of a validated, nonempty data set.
std::size_t covariate_dimension(std::span<const Observation> data);

}  // namespace ckm
