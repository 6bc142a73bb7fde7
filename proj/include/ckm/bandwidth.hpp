#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ckm/estimator.hpp"
#include "ckm/kernels.hpp"
#include "ckm/observation.hpp"

namespace ckm {

/// Regression whose leave-one-out error is scored.
enum class CvTarget {
  H,   ///< response 1(W <= t)
  H1,  ///< response 1(W <= t) * judgment
};

struct GridSearch {
  /// Candidate bandwidths per coordinate; the search visits their product.
  std::vector<std::vector<double>> candidates;
};

struct CoordinateDescent {
  std::vector<double> initial;
  double shrink = 0.8;
  double grow = 1.25;
  int max_iterations = 25;
  /// Stop once no coordinate move improves the score by more than this
  /// relative amount.
  double tolerance = 1e-6;
};

struct CvConfig {
  /// Increasing times for the functional integral.
  std::vector<double> t_grid;
  /// Time weighting; empty means w = 1.
  std::function<double(double)> weight_fn;
  bool score_h = true;
  bool score_h1 = true;
  Judgments judgments = Judgments::Expert;
  std::variant<GridSearch, CoordinateDescent> search = GridSearch{};
  /// Optional coordinate-descent pass started from the best grid point.
  std::optional<CoordinateDescent> refine;
  /// Pairwise weights are cached when n is at most this.
  std::size_t cache_limit = 6000;
  unsigned threads = 1;
};

/// Leave-one-out CV at one time for one target.
struct CvPoint {
  double score = 0.0;  ///< mean over included terms; NaN when none is left
  std::size_t included = 0;
  std::size_t excluded = 0;  ///< isolated observations (no neighbour weight)
  bool defined() const noexcept { return included > 0; }
};

/// CV via the shortcut (1 - H(Z_m)) / r_m with r_m = 1 - K(0) / sum_j K_jm.
/// An observation whose neighbours all carry zero weight is excluded and
/// counted. The score is the mean over included observations.
CvPoint cv_score_at_t(double t, const WeightCache& cache,
                      std::span<const Observation> data, CvTarget target,
                      Judgments judgments = Judgments::Expert);

/// The same score computed by refitting without each observation in turn.
/// O(n^2) per time; used to verify the shortcut.
CvPoint direct_loo_cv_score_at_t(double t, std::span<const Observation> data,
                                 const KernelSpec& spec, const BandwidthMatrix& bw,
                                 CvTarget target, Judgments judgments = Judgments::Expert);

struct CvEvaluation {
  std::vector<double> bandwidth;
  double score = 0.0;  ///< NaN when undefined
  bool defined = false;
  std::size_t excluded_terms = 0;
  std::vector<double> cv_h;   ///< per t_grid point (empty unless scored)
  std::vector<double> cv_h1;  ///< per t_grid point (empty unless scored)
};

/// Trapezoid over t_grid of w(s) (CV_H(s)^2 + CV_H1(s)^2); a one-point grid
/// gives the point value. Lower is better.
CvEvaluation functional_cv(const BandwidthMatrix& bw, std::span<const Observation> data,
                           const KernelSpec& spec, const CvConfig& config);

/// As above using a prebuilt cache; results are bit-identical to the
/// uncached path.
CvEvaluation functional_cv(const WeightCache& cache, std::span<const Observation> data,
                           const CvConfig& config);

struct BandwidthSelection {
  BandwidthMatrix selected;
  double score;
  std::vector<CvEvaluation> report;  ///< every evaluated candidate, in order
};

/// Minimizes functional_cv over the configured search. Ties go to the larger
/// |B|, then to the lexicographically larger diagonal.
/// AllCandidatesDegenerate if no candidate has a defined score.
BandwidthSelection select_bandwidth(std::span<const Observation> data,
                                    const KernelSpec& spec, const CvConfig& config);

/// Distinct observed times up to t_max, the default functional grid.
std::vector<double> default_cv_grid(std::span<const Observation> data, double t_max);

}  // namespace ckm
