#include "ckm/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ckm/error.hpp"
#include "ckm/numerics.hpp"

namespace ckm {

namespace {

double at_risk(const StepCurve& H, double u) {
  const double denom = 1.0 - H.value_left(u);
  if (denom < kDenominatorGuard) {
    throw Error(ErrorCode::DenominatorUnderflow,
                "1 - H(u-) vanishes at u=" + std::to_string(u));
  }
  return denom;
}

double inverse_density(const ConditionalFit& fit) {
  if (!(fit.g_hat > 0.0)) {
    throw Error(ErrorCode::ZeroDensity, "covariate density estimate is zero");
  }
  return 1.0 / fit.g_hat;
}

}  // namespace

double hazard_variance_integral(const StepCurve& Lambda, const StepCurve& H, double limit) {
  return stieltjes_integral(
      [&](double u) { return (1.0 - Lambda.jump_at(u)) / at_risk(H, u); }, Lambda, limit);
}

double distribution_variance_integral(const StepCurve& Lambda, const StepCurve& H,
                                      double limit) {
  return stieltjes_integral(
      [&](double u) {
        const double d = Lambda.jump_at(u);
        if (d >= 1.0) {
          throw Error(ErrorCode::SaturatedJump,
                      "hazard jump of 1 at u=" + std::to_string(u) +
                          " makes the variance undefined");
        }
        return 1.0 / (at_risk(H, u) * (1.0 - d));
      },
      Lambda, limit);
}

double sigma2_hazard(double t, double s, const ConditionalFit& fit, double kernel_l2) {
  const double scale = kernel_l2 * inverse_density(fit);
  return scale * hazard_variance_integral(fit.Lambda, fit.H, std::min(t, s));
}

double sigma2_distribution(double t, double s, const ConditionalFit& fit, double kernel_l2) {
  const double scale = kernel_l2 * inverse_density(fit);
  const double integral = distribution_variance_integral(fit.Lambda, fit.H, std::min(t, s));
  return fit.survival(t) * fit.survival(s) * scale * integral;
}

double ci_half_width(double sigma2, double scale, double level) {
  if (!(level >= 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in [0,1)");
  }
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "n|B| must be > 0");
  if (level == 0.0) return 0.0;
  return normal_quantile(0.5 * (1.0 + level)) * std::sqrt(sigma2 / scale);
}

std::vector<IntervalRow> pointwise_ci(const ConditionalFit& fit,
                                      std::span<const double> t_grid, double level,
                                      double scale, double kernel_l2) {
  std::vector<IntervalRow> rows;
  rows.reserve(t_grid.size());
  for (double t : t_grid) {
    const double center = fit.F.value(t);
    const double s2 = sigma2_distribution(t, t, fit, kernel_l2);
    const double hw = ci_half_width(s2, scale, level);
    rows.push_back({t, std::clamp(center - hw, 0.0, 1.0), std::clamp(center + hw, 0.0, 1.0),
                    center, s2});
  }
  return rows;
}

std::vector<IntervalRow> pointwise_ci(const ConditionalFit& fit,
                                      std::span<const double> t_grid, double level,
                                      std::size_t n, const BandwidthMatrix& bw,
                                      double kernel_l2) {
  return pointwise_ci(fit, t_grid, level, static_cast<double>(n) * bw.determinant(),
                      kernel_l2);
}

StepCurve biased_center(const ConditionalFit& fit, const BiasFunctional& gamma) {
  return biased_limit(fit.Lambda, gamma.gamma);
}

}  // namespace ckm
