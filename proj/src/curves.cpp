#include "ckm/curves.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "ckm/error.hpp"

namespace ckm {

namespace {

void validate_times(const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "step curve jump time must be finite and nonnegative");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw Error(ErrorCode::InvalidArgument,
                  "step curve jump times must be strictly increasing");
    }
  }
}

}  // namespace

StepCurve::StepCurve(std::vector<double> times, std::vector<double> sizes,
                     std::vector<double> values, double baseline,
                     bool monotone)
    : times_(std::move(times)),
      sizes_(std::move(sizes)),
      values_(std::move(values)),
      baseline_(baseline),
      monotone_(monotone) {}

StepCurve StepCurve::from_jumps(std::vector<double> times,
                                std::vector<double> sizes, double baseline,
                                bool monotone) {
  if (times.size() != sizes.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "jump_times and jump_sizes differ in length");
  }
  validate_times(times);
  std::vector<double> values(sizes.size());
  double acc = baseline;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (monotone && !(sizes[i] >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument,
                  "monotone step curve has a negative jump");
    }
    acc += sizes[i];
    values[i] = acc;
  }
  return StepCurve(std::move(times), std::move(sizes), std::move(values),
                   baseline, monotone);
}

StepCurve StepCurve::from_values(std::vector<double> times,
                                 std::vector<double> values, double baseline,
                                 bool monotone) {
  if (times.size() != values.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "jump_times and values differ in length");
  }
  validate_times(times);
  std::vector<double> sizes(values.size());
  double prev = baseline;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sizes[i] = values[i] - prev;
    if (monotone && !(sizes[i] >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument,
                  "monotone step curve has a decreasing value");
    }
    prev = values[i];
  }
  return StepCurve(std::move(times), std::move(sizes), std::move(values),
                   baseline, monotone);
}

double StepCurve::value(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return baseline_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepCurve::value_left(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return baseline_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepCurve::jump_at(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.end() || *it != t) return 0.0;
  return sizes_[static_cast<std::size_t>(it - times_.begin())];
}

StepCurve StepCurve::truncated(double t_max) const {
  const auto end = std::upper_bound(times_.begin(), times_.end(), t_max);
  const auto n = static_cast<std::size_t>(end - times_.begin());
  return StepCurve(std::vector<double>(times_.begin(), times_.begin() + n),
                   std::vector<double>(sizes_.begin(), sizes_.begin() + n),
                   std::vector<double>(values_.begin(), values_.begin() + n),
                   baseline_, monotone_);
}

std::vector<double> StepCurve::sample(std::span<const double> grid) const {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(value(t));
  return out;
}

void StepCurve::write_table(std::ostream& os) const {
  os << "time,value\n";
  const auto old_precision = os.precision(17);
  if (times_.empty() || times_.front() > 0.0) os << 0.0 << ',' << baseline_ << '\n';
  for (std::size_t i = 0; i < times_.size(); ++i) {
    os << times_[i] << ',' << values_[i] << '\n';
  }
  os.precision(old_precision);
}

}  // namespace ckm
