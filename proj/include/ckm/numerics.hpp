#pragma once

#include <cmath>
#include <functional>

namespace ckm {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Standard normal quantile. Rational approximation refined by one Halley
/// step; absolute error below 1e-12 on (1e-300, 1 - 1e-16).
double normal_quantile(double p);

struct QuadratureResult {
  double value = 0.0;
  bool converged = true;
};

/// Adaptive Simpson quadrature on [a, b] with absolute tolerance `tol`.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b, double tol = 1e-8,
                                  int max_depth = 48);

/// As above but throws QuadratureNonconvergence instead of flagging.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-8);

}  // namespace ckm
