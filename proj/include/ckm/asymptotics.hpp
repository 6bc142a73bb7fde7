#pragma once

#include <span>
#include <vector>

#include "ckm/curves.hpp"
#include "ckm/estimator.hpp"
#include "ckm/expert.hpp"

namespace ckm {

// Plug-in covariance functions of the limiting Gaussian processes for the
// expert Nelson-Aalen and Kaplan-Meier estimators, and pointwise intervals.
// The plug-in is heuristic: there is no consistency result for it, and it is
// validated by Monte Carlo only.

/// Stieltjes sum over jumps u <= limit of Lambda of
/// (1 - dLambda) dLambda / (1 - H(u-)).
double hazard_variance_integral(const StepCurve& Lambda, const StepCurve& H, double limit);

/// Stieltjes sum over jumps u <= limit of dLambda / ((1 - H(u-)) (1 - dLambda)).
/// SaturatedJump if some dLambda = 1 in range.
double distribution_variance_integral(const StepCurve& Lambda, const StepCurve& H,
                                      double limit);

/// sigma^2_L(t, s) = (int K^2 / g) * hazard_variance_integral(t ^ s).
double sigma2_hazard(double t, double s, const ConditionalFit& fit, double kernel_l2);

/// sigma^2_Z(t, s) = S(t) S(s) (int K^2 / g) * distribution_variance_integral(t ^ s),
/// S = 1 - F.
double sigma2_distribution(double t, double s, const ConditionalFit& fit, double kernel_l2);

struct IntervalRow {
  double t;
  double lower;
  double upper;
  double center;  ///< F estimate at t
  double sigma2;  ///< sigma^2_Z(t, t)
};

/// F(t) -/+ z_{(1+level)/2} sqrt(sigma2_Z(t,t) / (n|B|)), clipped to [0, 1].
/// `scale` is n|B|.
std::vector<IntervalRow> pointwise_ci(const ConditionalFit& fit,
                                      std::span<const double> t_grid, double level,
                                      double scale, double kernel_l2);

/// Overload computing n|B| from its factors.
std::vector<IntervalRow> pointwise_ci(const ConditionalFit& fit,
                                      std::span<const double> t_grid, double level,
                                      std::size_t n, const BandwidthMatrix& bw,
                                      double kernel_l2);

/// Half-width z_{(1+level)/2} sqrt(sigma2 / scale).
double ci_half_width(double sigma2, double scale, double level);

/// Distribution function phi(-Lambda - Gamma) of the center a biased expert
/// estimator fluctuates around.
StepCurve biased_center(const ConditionalFit& fit, const BiasFunctional& gamma);

}  // namespace ckm
