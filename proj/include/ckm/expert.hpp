#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ckm/curves.hpp"
#include "ckm/estimator.hpp"
#include "ckm/observation.hpp"
#include "ckm/rng.hpp"

namespace ckm {

/// Probability that an observed event at (w, z) is genuine.
using ProbabilityFn = std::function<double(double w, std::span<const double> z)>;
using DensityFn = std::function<double(double t, std::span<const double> z)>;
using CovariatePredicate = std::function<bool(std::span<const double> z)>;

/// Rule turning (delta, w, z) plus randomness into a judgment eta <= delta.
///
/// On delta = 1 the judgment is Bernoulli with the variant's acceptance
/// probability: Perfect p(w,z); Naive 1; Partial (1 - p0) + p0 p(w,z);
/// UniformCensor c; ThresholdCensor c where the predicate holds, else 1.
class ExpertModel {
public:
  enum class Kind { Perfect, Naive, Partial, UniformCensor, ThresholdCensor };

  static ExpertModel perfect(ProbabilityFn p);
  static ExpertModel naive();
  static ExpertModel partial(double p0, ProbabilityFn p);
  static ExpertModel uniform_censor(double c);
  static ExpertModel threshold_censor(double c, CovariatePredicate predicate);

  Kind kind() const noexcept { return kind_; }
  /// Information parameter: 1 for Perfect, 0 for Naive.
  double information() const noexcept { return p0_; }

  /// P(eta = 1 | delta = 1, w, z). InvalidProbability if p leaves [0, 1].
  double acceptance_probability(double w, std::span<const double> z) const;

private:
  ExpertModel(Kind kind, double p0, double c, ProbabilityFn p, CovariatePredicate pred)
      : kind_(kind), p0_(p0), c_(c), p_(std::move(p)), predicate_(std::move(pred)) {}

  Kind kind_;
  double p0_;
  double c_;
  ProbabilityFn p_;
  CovariatePredicate predicate_;
};

/// One judgment; consumes exactly one uniform from `rng` whenever delta = 1.
int judge(const ExpertModel& model, const Observation& obs, Substream& rng);

/// Judges every observation in place. Observation i draws from the substream
/// (seed, replication, kExpertStream, i), so results do not depend on order.
void judge_all(const ExpertModel& model, std::span<Observation> data, std::uint64_t seed,
               std::uint32_t replication);

/// Re-accepts each rejected event of a perfect expert with probability
/// 1 - p0, which gives the Partial(p0) law.
int thin_to_partial(int perfect_eta, int delta, double p0, Substream& rng);

/// w -> f_event / (f_event + f_contam). The returned function throws
/// BothDensitiesZero where both densities vanish.
ProbabilityFn p_from_densities(DensityFn f_event, DensityFn f_contam);

/// Integrated hazard distortion of a partially informed expert at one z.
struct BiasFunctional {
  StepCurve gamma;
  double p0 = 1.0;
  std::optional<double> truncated_at;
};

/// Gamma(t) = (1 - p0) sum_{s <= t} (1 - p_hat(s)) dH1x(s) / (1 - H(s-)),
/// with H1x the naive (delta-weighted) sub-distribution estimate.
BiasFunctional gamma_functional(const std::function<double(double)>& p_hat, double p0,
                                const StepCurve& H, const StepCurve& H1_naive,
                                double t_max = kNoTimeLimit);

/// Plug-in Gamma at z0 with p_hat evaluated per observation at (W_i, Z_i):
/// the naive sub-distribution is reweighted by delta_i (1 - p_hat(W_i, Z_i)).
/// Reduces to `gamma_functional` when p_hat depends on (w, z0) only.
BiasFunctional gamma_plugin(std::span<const Observation> data,
                            std::span<const double> weights, const ProbabilityFn& p_hat,
                            double p0, double t_max = kNoTimeLimit);

/// Distribution function of the limit prod(1 - d(Lambda + Gamma)): the curve a
/// biased estimator converges to. Gamma empty or all-zero returns exactly
/// product_integral(Lambda).
StepCurve biased_limit(const StepCurve& Lambda, const StepCurve& gamma);

/// Continuous-case shortcut: survival * exp(-Gamma).
double biased_survival_continuous(double survival, double gamma);

}  // namespace ckm
