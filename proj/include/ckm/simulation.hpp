#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ckm/expert.hpp"
#include "ckm/kernels.hpp"
#include "ckm/observation.hpp"

namespace ckm {

/// Disability portfolio with contaminated event reports.
///
/// Disability hazard a exp(b (t + z_age)); contamination hazard
/// c0 + c1 z_rep; censoring Uniform[0, censor_upper]; Z_age normal,
/// Z_rep Poisson.
struct DisabilityScenario {
  std::size_t n = 2000;
  double age_mean = 50.0;
  double age_var = 100.0;
  double reportings_rate = 0.3;
  double censor_upper = 50.0;
  double a = 0.01;
  double b = 0.02;
  double c0 = 0.005;
  double c1 = 0.02;
  std::uint64_t seed = 1;

  /// InvalidArgument unless every rate and scale is positive.
  void validate() const;
};

/// Latent times behind one simulated observation.
struct Latent {
  double x;  ///< disability time
  double y;  ///< contamination time
  double c;  ///< censoring time
};

/// Observations carry z = (z_age, z_rep) and no judgments.
struct Portfolio {
  std::vector<Observation> observations;
  std::vector<Latent> latents;
};

/// Observation i draws from substream (seed, replication, kPortfolioStream, i).
Portfolio simulate_portfolio(const DisabilityScenario& scenario,
                             std::uint32_t replication = 0);

/// Copies of `data` keeping only the listed covariate columns, in that order.
std::vector<Observation> project_covariates(std::span<const Observation> data,
                                            std::span<const std::size_t> columns);

double disability_hazard(double t, double z_age, const DisabilityScenario& s = {});
double contamination_rate(double z_rep, const DisabilityScenario& s = {});

/// exp(-(a/b) e^{b z_age} (e^{bt} - 1)).
double true_survival_disability(double t, double z_age, const DisabilityScenario& s = {});

/// Inverse of true_survival_disability in t for a survival level u in (0, 1].
double disability_quantile(double u, double z_age, const DisabilityScenario& s = {});

/// Probability that a reported event at w is a disability, given
/// z = (z_age, z_rep): the ratio of the disability hazard to the total
/// event hazard.
double true_p(double w, std::span<const double> z, const DisabilityScenario& s = {});
ProbabilityFn true_p_function(const DisabilityScenario& s = {});

/// Smallest M with P(Z_rep > M) < 1e-10.
int poisson_truncation(double mean);

/// Gamma(t | z_age) at true quantities with Z_rep mixed out.
double true_gamma(double t, double z_age, double p0, const DisabilityScenario& s = {});

/// exp(-Gamma) times the true survival; equals it exactly at p0 = 1.
double true_biased_center(double t, double z_age, double p0,
                          const DisabilityScenario& s = {});

/// sigma_Z(t, t) / sqrt(n |B|) at true quantities for the scalar age
/// regression. Only defined for t < censor_upper.
double true_sd(double t, double z_age, std::size_t n, double bw_det, double kernel_l2,
               const DisabilityScenario& s = {});

/// One expert in a study. p0 = 1 is the perfect expert, p0 = 0 the naive one.
struct McExpert {
  std::string name;
  double p0 = 1.0;
};

/// Survival values on a (z, t) grid, stored z-major.
struct SurvivalGrid {
  std::vector<double> t_grid;
  std::vector<double> z_grid;
  std::vector<double> values;

  double at(std::size_t zi, std::size_t ti) const { return values[zi * t_grid.size() + ti]; }
};

struct HeatmapSpec {
  std::vector<double> t_grid;
  std::vector<double> z_grid;
  /// Expert names whose Monte Carlo mean grids are recorded.
  std::vector<std::string> experts;
};

struct McStudyConfig {
  DisabilityScenario scenario;
  std::vector<McExpert> experts;
  std::vector<double> z_points;
  std::vector<double> t_points;
  std::size_t replications = 100;
  double rho = 0.3;
  /// Fixed scalar bandwidth; the schedule in rho is used when empty.
  std::optional<double> bandwidth;
  std::optional<HeatmapSpec> heatmap;
  /// Cells with a larger failed-replication share are flagged.
  double failure_flag_share = 0.05;
  unsigned threads = 1;
};

struct McCell {
  double z_age;
  std::string expert;
  double p0;
  double t;
  std::size_t replications;  ///< successful fits entering the statistics
  std::size_t failures;
  bool flagged;
  double mean;
  double sd;
  double true_unbiased;
  double true_center;
  double true_sd;
};

struct McHeatmap {
  std::string expert;
  SurvivalGrid mean;
  std::size_t failures = 0;
};

struct McStudyResult {
  double bandwidth = 0.0;
  std::vector<McCell> cells;  ///< ordered by z, then expert, then t
  std::vector<McHeatmap> heatmaps;
  std::optional<SurvivalGrid> truth;
};

/// Replications run in parallel; every statistic is reduced in replication
/// order, so the result does not depend on the thread count.
McStudyResult run_mc_study(const McStudyConfig& config);

/// a - b pointwise; GridMismatch unless both grids share axes exactly.
SurvivalGrid heatmap_difference(const SurvivalGrid& a, const SurvivalGrid& b);

/// Loan book row in calendar form.
struct LoanRecord {
  std::chrono::sys_days issue;
  std::chrono::sys_days last_payment;
  std::optional<std::chrono::sys_days> default_date;
  std::chrono::sys_days cutoff;
  double dti;  ///< debt-to-income, percent
  double ir;   ///< interest rate, percent
};

struct LoanScenario {
  std::size_t n = 10130;
  std::uint64_t seed = 1;
};

/// Synthetic loan book for pipeline tests. Covariate ranges, quadrant sizes
/// and quadrant default shares follow the published summary of a real
/// portfolio; nothing else about it is calibrated.
std::vector<LoanRecord> generate_synthetic_loans(const LoanScenario& scenario);

}  // namespace ckm
