#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace ckm {

/// Right-continuous step function of time with finitely many jumps.
///
/// Stores both the jump increments and the cumulative values after each jump
/// so that evaluation and Stieltjes sums never re-accumulate. Jump times are
/// strictly increasing and nonnegative; ties must be merged by the producer.
class StepCurve {
public:
  StepCurve() = default;

  /// Builds from increments; cumulative values are running sums from
  /// `baseline`.
  static StepCurve from_jumps(std::vector<double> times,
                              std::vector<double> sizes, double baseline = 0.0,
                              bool monotone = false);

  /// Builds from cumulative values; increments are successive differences.
  static StepCurve from_values(std::vector<double> times,
                               std::vector<double> values,
                               double baseline = 0.0, bool monotone = false);

  /// baseline + sum of jumps at times <= t.
  double value(double t) const;
  /// baseline + sum of jumps at times < t.
  double value_left(double t) const;
  /// Increment at exactly t, 0 if t is not a jump time.
  double jump_at(double t) const;

  double baseline() const noexcept { return baseline_; }
  bool monotone() const noexcept { return monotone_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  double final_value() const noexcept {
    return values_.empty() ? baseline_ : values_.back();
  }

  std::span<const double> jump_times() const noexcept { return times_; }
  std::span<const double> jump_sizes() const noexcept { return sizes_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Keeps only the jumps at times <= t_max.
  StepCurve truncated(double t_max) const;

  /// Evaluates `value` on each grid point.
  std::vector<double> sample(std::span<const double> grid) const;

  /// Two-column "time,value" table, one row per jump (plus a t=0 row).
  void write_table(std::ostream& os) const;

private:
  StepCurve(std::vector<double> times, std::vector<double> sizes,
            std::vector<double> values, double baseline, bool monotone);

  std::vector<double> times_;
  std::vector<double> sizes_;
  std::vector<double> values_;
  double baseline_ = 0.0;
  bool monotone_ = false;
};

/// Sum over jumps s <= t_max of integrand(s) * jump(s).
template <class Integrand>
double stieltjes_integral(Integrand&& integrand, const StepCurve& integrator,
                          double t_max) {
  const auto times = integrator.jump_times();
  const auto sizes = integrator.jump_sizes();
  double acc = 0.0;
  for (std::size_t i = 0; i < times.size() && times[i] <= t_max; ++i) {
    acc += integrand(times[i]) * sizes[i];
  }
  return acc;
}

}  // namespace ckm
