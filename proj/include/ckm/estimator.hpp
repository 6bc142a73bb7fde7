#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ckm/curves.hpp"
#include "ckm/kernels.hpp"
#include "ckm/observation.hpp"

namespace ckm {

inline constexpr double kNoTimeLimit = std::numeric_limits<double>::infinity();

/// Hazard steps are refused when 1 - H(s-) falls below this.
inline constexpr double kDenominatorGuard = 1e-12;

/// Which indicator counts as an event in the sub-distribution estimate.
enum class Judgments {
  Expert,  ///< the expert's eta; every observation must carry one
  Naive,   ///< eta := delta, the identity expert
};

/// Conditional expert Kaplan-Meier fit at one covariate point.
struct ConditionalFit {
  std::vector<double> z0;
  StepCurve H;       ///< estimate of H(t|z0) = P(W <= t | z0)
  StepCurve H1;      ///< judged sub-distribution estimate
  StepCurve Lambda;  ///< expert Nelson-Aalen cumulative hazard
  StepCurve F;       ///< distribution estimate, 1 - prod(1 - dLambda)
  double g_hat = 0.0;        ///< covariate density estimate at z0
  double n_effective = 0.0;  ///< sum of raw kernel values K(B^-1(Z_i - z0))
  std::size_t n = 0;
  /// Time of the first hazard jump refused by the denominator guard, if any.
  std::optional<double> truncated_at;

  double survival(double t) const { return 1.0 - F.value(t); }
};

struct NelsonAalenResult {
  StepCurve hazard;
  std::optional<double> truncated_at;
};

/// Raw kernel values K(B^-1(Z_i - z0)) for every observation.
std::vector<double> kernel_weights(std::span<const Observation> data,
                                   const KernelSpec& spec,
                                   const BandwidthMatrix& bw,
                                   std::span<const double> z0);

/// (1/(n|B|)) sum_i K(B^-1(Z_i - z0)).
double density_estimate(std::span<const Observation> data, const KernelSpec& spec,
                        const BandwidthMatrix& bw, std::span<const double> z0);

/// Weighted empirical distribution of W: a jump at each distinct time carrying
/// that time's share of the total weight. Zero-weight observations contribute
/// no jump. ZeroDensity if the weights sum to zero.
StepCurve weighted_distribution(std::span<const Observation> data,
                                std::span<const double> weights);

/// As `weighted_distribution` but each observation's weight is multiplied by
/// its judgment (eta or delta).
StepCurve weighted_subdistribution(std::span<const Observation> data,
                                   std::span<const double> weights,
                                   Judgments judgments);

/// Nadaraya-Watson estimate of H(.|z0).
StepCurve h_estimate(std::span<const Observation> data, const KernelSpec& spec,
                     const BandwidthMatrix& bw, std::span<const double> z0);

/// Nadaraya-Watson estimate of the judged sub-distribution at z0.
/// MissingJudgments if some observation has no eta.
StepCurve h1_expert_estimate(std::span<const Observation> data,
                             const KernelSpec& spec, const BandwidthMatrix& bw,
                             std::span<const double> z0);

/// Lambda(t) = sum over jumps s <= t of dH1(s) / (1 - H(s-)).
///
/// Stops at the first jump whose denominator is below kDenominatorGuard and
/// reports that time in `truncated_at`. JumpOutOfRange if an increment leaves
/// [0, 1], which only happens when H1 is not dominated by H.
NelsonAalenResult nelson_aalen_expert(const StepCurve& H, const StepCurve& H1,
                                      double t_max = kNoTimeLimit);

/// F with 1 - F(t) = prod_{s <= t} (1 - dLambda(s)). JumpOutOfRange if a
/// hazard increment lies outside [0, 1].
StepCurve product_integral(const StepCurve& Lambda, double t_max = kNoTimeLimit);

/// Full chain from precomputed raw kernel weights. Weights may carry any
/// positive scale; only ratios enter the curves. `bw_det` feeds g_hat.
ConditionalFit fit_from_weights(std::span<const Observation> data,
                                std::span<const double> weights,
                                Judgments judgments, double bw_det,
                                std::span<const double> z0,
                                double t_max = kNoTimeLimit);

/// h_estimate -> judged H1 -> Nelson-Aalen -> product integral at z0.
/// With expert_judged == false the identity expert eta := delta is used.
ConditionalFit fit_conditional_km(std::span<const Observation> data,
                                  bool expert_judged, const KernelSpec& spec,
                                  const BandwidthMatrix& bw,
                                  std::span<const double> z0,
                                  double t_max = kNoTimeLimit);

}  // namespace ckm
