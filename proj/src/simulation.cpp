#include "ckm/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "ckm/error.hpp"
#include "ckm/estimator.hpp"
#include "ckm/numerics.hpp"
#include "ckm/parallel.hpp"
#include "ckm/rng.hpp"

namespace ckm {

namespace {

constexpr double kPoissonTail = 1e-10;
constexpr double kTruthTolerance = 1e-11;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be finite and > 0");
  }
}

double gompertz_scale(double z_age, const DisabilityScenario& s) {
  return (s.a / s.b) * std::exp(s.b * z_age);
}

// Z_rep law truncated at poisson_truncation; pmf by recursion.
struct ReportingsMixture {
  std::vector<double> weight;
  std::vector<double> rate;

  explicit ReportingsMixture(const DisabilityScenario& s) {
    const int m_max = poisson_truncation(s.reportings_rate);
    double pm = std::exp(-s.reportings_rate);
    for (int m = 0; m <= m_max; ++m) {
      if (m > 0) pm *= s.reportings_rate / m;
      weight.push_back(pm);
      rate.push_back(contamination_rate(m, s));
    }
  }

  // P(Y > t | z_age), mixed over Z_rep.
  double survival(double t) const {
    double v = 0.0;
    for (std::size_t m = 0; m < weight.size(); ++m) v += weight[m] * std::exp(-rate[m] * t);
    return v;
  }

  // Contamination density part of dH1x with the factors shared with 1 - H
  // removed, i.e. sum_m pi_m mu_m P(Y > t | m).
  double rejected_density(double t) const {
    double v = 0.0;
    for (std::size_t m = 0; m < weight.size(); ++m) {
      v += weight[m] * rate[m] * std::exp(-rate[m] * t);
    }
    return v;
  }
};

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::ConfigError, "heatmap names unknown expert '" + name + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

ExpertModel make_expert(const McExpert& e, const DisabilityScenario& s) {
  if (e.p0 == 0.0) return ExpertModel::naive();
  if (e.p0 == 1.0) return ExpertModel::perfect(true_p_function(s));
  return ExpertModel::partial(e.p0, true_p_function(s));
}

void validate_study(const McStudyConfig& c) {
  c.scenario.validate();
  if (c.replications < 2) throw Error(ErrorCode::InvalidArgument, "study needs R >= 2");
  if (c.experts.empty()) throw Error(ErrorCode::InvalidArgument, "study needs an expert");
  std::set<std::string> names;
  for (const auto& e : c.experts) {
    if (!(e.p0 >= 0.0 && e.p0 <= 1.0)) {
      throw Error(ErrorCode::InvalidProbability, "expert '" + e.name + "' has p0 outside [0,1]");
    }
    if (!names.insert(e.name).second) {
      throw Error(ErrorCode::ConfigError, "duplicate expert name '" + e.name + "'");
    }
  }
  if (c.z_points.empty() || c.t_points.empty()) {
    throw Error(ErrorCode::InvalidArgument, "study needs z and t points");
  }
  for (double t : c.t_points) {
    if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "study times must be >= 0");
  }
  if (c.bandwidth) require_positive(*c.bandwidth, "study bandwidth");
  if (c.heatmap) {
    if (c.heatmap->t_grid.empty() || c.heatmap->z_grid.empty()) {
      throw Error(ErrorCode::InvalidArgument, "heatmap grids must be nonempty");
    }
  }
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v, double mean) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void DisabilityScenario::validate() const {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "portfolio size must be >= 1");
  require_positive(age_var, "age variance");
  require_positive(reportings_rate, "reportings rate");
  require_positive(censor_upper, "censoring upper bound");
  require_positive(a, "disability parameter a");
  require_positive(b, "disability parameter b");
  require_positive(c0, "contamination parameter c0");
  require_positive(c1, "contamination parameter c1");
  if (!std::isfinite(age_mean)) throw Error(ErrorCode::InvalidArgument, "age mean not finite");
}

Portfolio simulate_portfolio(const DisabilityScenario& s, std::uint32_t replication) {
  s.validate();
  Portfolio out;
  out.observations.reserve(s.n);
  out.latents.reserve(s.n);
  const double age_sd = std::sqrt(s.age_var);
  for (std::size_t i = 0; i < s.n; ++i) {
    Substream rng(s.seed, replication, kPortfolioStream, static_cast<std::uint32_t>(i));
    const double age = rng.normal(s.age_mean, age_sd);
    const int reps = rng.poisson(s.reportings_rate);
    const double c = s.censor_upper * rng.uniform();
    const double x = disability_quantile(rng.uniform(), age, s);
    const double y = rng.exponential(contamination_rate(reps, s));
    const double event = std::min(x, y);
    Observation o;
    o.w = std::min(event, c);
    o.delta = event <= c ? 1 : 0;
    o.z = {age, static_cast<double>(reps)};
    out.observations.push_back(std::move(o));
    out.latents.push_back({x, y, c});
  }
  return out;
}

std::vector<Observation> project_covariates(std::span<const Observation> data,
                                            std::span<const std::size_t> columns) {
  std::vector<Observation> out;
  out.reserve(data.size());
  for (const auto& o : data) {
    Observation p{o.w, o.delta, {}, o.eta};
    p.z.reserve(columns.size());
    for (std::size_t c : columns) {
      if (c >= o.z.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "covariate column " + std::to_string(c) + " out of range");
      }
      p.z.push_back(o.z[c]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

double disability_hazard(double t, double z_age, const DisabilityScenario& s) {
  return s.a * std::exp(s.b * (t + z_age));
}

double contamination_rate(double z_rep, const DisabilityScenario& s) {
  return s.c0 + s.c1 * z_rep;
}

double true_survival_disability(double t, double z_age, const DisabilityScenario& s) {
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "survival needs t >= 0");
  return std::exp(-gompertz_scale(z_age, s) * std::expm1(s.b * t));
}

double disability_quantile(double u, double z_age, const DisabilityScenario& s) {
  if (!(u > 0.0 && u <= 1.0)) throw Error(ErrorCode::InvalidProbability, "u outside (0,1]");
  return std::log1p(-std::log(u) / gompertz_scale(z_age, s)) / s.b;
}

double true_p(double w, std::span<const double> z, const DisabilityScenario& s) {
  if (z.size() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "true_p needs z = (z_age, z_rep)");
  }
  const double mx = disability_hazard(w, z[0], s);
  return mx / (mx + contamination_rate(z[1], s));
}

ProbabilityFn true_p_function(const DisabilityScenario& s) {
  return [s](double w, std::span<const double> z) { return true_p(w, z, s); };
}

int poisson_truncation(double mean) {
  if (!(mean > 0.0)) throw Error(ErrorCode::InvalidArgument, "Poisson mean must be > 0");
  double pm = std::exp(-mean);
  double cdf = pm;
  int m = 0;
  while (1.0 - cdf >= kPoissonTail) {
    ++m;
    pm *= mean / m;
    cdf += pm;
    if (m > 10000) break;
  }
  return m;
}

double true_gamma(double t, double z_age, double p0, const DisabilityScenario& s) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error(ErrorCode::InvalidProbability, "p0 outside [0,1]");
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "Gamma needs t >= 0");
  s.validate();
  (void)z_age;  // the disability and censoring factors cancel in the ratio
  if (p0 == 1.0 || t == 0.0) return 0.0;
  const ReportingsMixture mix(s);
  // (1 - p) dH1x / (1 - H) with every factor not involving Z_rep cancelled.
  const double integral =
      integrate([&](double u) { return mix.rejected_density(u) / mix.survival(u); }, 0.0, t,
                kTruthTolerance);
  return (1.0 - p0) * integral;
}

double true_biased_center(double t, double z_age, double p0, const DisabilityScenario& s) {
  const double surv = true_survival_disability(t, z_age, s);
  if (p0 == 1.0) return surv;
  return biased_survival_continuous(surv, true_gamma(t, z_age, p0, s));
}

double true_sd(double t, double z_age, std::size_t n, double bw_det, double kernel_l2,
               const DisabilityScenario& s) {
  s.validate();
  if (!(t >= 0.0 && t < s.censor_upper)) {
    throw Error(ErrorCode::InvalidArgument, "true_sd needs 0 <= t < censor_upper");
  }
  require_positive(bw_det, "|B|");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "true_sd needs n >= 1");
  const ReportingsMixture mix(s);
  const double age_sd = std::sqrt(s.age_var);
  const double g = normal_pdf((z_age - s.age_mean) / age_sd) / age_sd;
  const double integral = integrate(
      [&](double u) {
        const double at_risk = true_survival_disability(u, z_age, s) * mix.survival(u) *
                               (1.0 - u / s.censor_upper);
        return disability_hazard(u, z_age, s) / at_risk;
      },
      0.0, t, kTruthTolerance);
  const double surv = true_survival_disability(t, z_age, s);
  const double sigma2 = surv * surv * (kernel_l2 / g) * integral;
  return std::sqrt(sigma2 / (static_cast<double>(n) * bw_det));
}

McStudyResult run_mc_study(const McStudyConfig& config) {
  validate_study(config);
  const auto& sc = config.scenario;
  const KernelSpec spec(1, Kernel::truncated_gaussian());
  const BandwidthMatrix bw = config.bandwidth
                                 ? BandwidthMatrix::uniform(1, *config.bandwidth)
                                 : BandwidthMatrix::schedule(sc.n, 1, config.rho);
  const double l2 = kernel_l2_norm(spec);

  const std::size_t ne = config.experts.size();
  const std::size_t nz = config.z_points.size();
  const std::size_t nt = config.t_points.size();
  std::vector<std::string> names;
  std::vector<ExpertModel> models;
  for (const auto& e : config.experts) {
    names.push_back(e.name);
    models.push_back(make_expert(e, sc));
  }

  std::vector<std::size_t> heat_experts;
  std::size_t hz = 0;
  std::size_t ht = 0;
  double t_max = *std::max_element(config.t_points.begin(), config.t_points.end());
  if (config.heatmap) {
    for (const auto& name : config.heatmap->experts) heat_experts.push_back(index_of(names, name));
    hz = config.heatmap->z_grid.size();
    ht = config.heatmap->t_grid.size();
    t_max = std::max(t_max, *std::max_element(config.heatmap->t_grid.begin(),
                                              config.heatmap->t_grid.end()));
  }
  const std::size_t nh = heat_experts.size();

  // Per-replication slots; NaN marks a failed fit.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> cell_slots(config.replications);
  std::vector<std::vector<double>> heat_slots(config.replications);

  parallel_for(config.replications, config.threads, [&](std::size_t r) {
    const auto rep = static_cast<std::uint32_t>(r);
    const auto portfolio = simulate_portfolio(sc, rep);
    std::vector<std::vector<Observation>> judged(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      judged[e] = portfolio.observations;
      // Same substreams for every expert: judgments are coupled across experts.
      judge_all(models[e], judged[e], sc.seed, rep);
    }
    const std::size_t age_column[] = {0};
    const auto ages = project_covariates(portfolio.observations, age_column);

    auto fit_survival = [&](std::size_t e, double z, std::span<const double> times,
                            std::span<double> out) {
      const double z0[] = {z};
      try {
        const auto w = kernel_weights(ages, spec, bw, z0);
        const auto fit = fit_from_weights(judged[e], w, Judgments::Expert, bw.determinant(),
                                          z0, t_max);
        for (std::size_t i = 0; i < times.size(); ++i) out[i] = fit.survival(times[i]);
      } catch (const Error&) {
        std::fill(out.begin(), out.end(), nan);
      }
    };

    auto& cells = cell_slots[r];
    cells.assign(nz * ne * nt, nan);
    for (std::size_t zi = 0; zi < nz; ++zi) {
      for (std::size_t e = 0; e < ne; ++e) {
        fit_survival(e, config.z_points[zi], config.t_points,
                     std::span<double>(cells).subspan((zi * ne + e) * nt, nt));
      }
    }
    auto& heat = heat_slots[r];
    heat.assign(nh * hz * ht, nan);
    for (std::size_t h = 0; h < nh; ++h) {
      for (std::size_t zi = 0; zi < hz; ++zi) {
        fit_survival(heat_experts[h], config.heatmap->z_grid[zi], config.heatmap->t_grid,
                     std::span<double>(heat).subspan((h * hz + zi) * ht, ht));
      }
    }
  });

  McStudyResult result;
  result.bandwidth = bw[0];
  std::vector<double> column;
  for (std::size_t zi = 0; zi < nz; ++zi) {
    const double z = config.z_points[zi];
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t ti = 0; ti < nt; ++ti) {
        const double t = config.t_points[ti];
        column.clear();
        for (std::size_t r = 0; r < config.replications; ++r) {
          const double v = cell_slots[r][(zi * ne + e) * nt + ti];
          if (!std::isnan(v)) column.push_back(v);
        }
        McCell cell{};
        cell.z_age = z;
        cell.expert = names[e];
        cell.p0 = config.experts[e].p0;
        cell.t = t;
        cell.replications = column.size();
        cell.failures = config.replications - column.size();
        cell.flagged = static_cast<double>(cell.failures) >
                       config.failure_flag_share * static_cast<double>(config.replications);
        cell.mean = column.empty() ? nan : mean_of(column);
        cell.sd = column.empty() ? nan : sd_of(column, cell.mean);
        cell.true_unbiased = true_survival_disability(t, z, sc);
        cell.true_center = true_biased_center(t, z, cell.p0, sc);
        cell.true_sd = t < sc.censor_upper ? true_sd(t, z, sc.n, bw.determinant(), l2, sc) : nan;
        result.cells.push_back(std::move(cell));
      }
    }
  }

  if (config.heatmap) {
    const auto& hm = *config.heatmap;
    SurvivalGrid truth{hm.t_grid, hm.z_grid, {}};
    for (double z : hm.z_grid) {
      for (double t : hm.t_grid) truth.values.push_back(true_survival_disability(t, z, sc));
    }
    result.truth = std::move(truth);
    for (std::size_t h = 0; h < nh; ++h) {
      McHeatmap map;
      map.expert = names[heat_experts[h]];
      map.mean = SurvivalGrid{hm.t_grid, hm.z_grid, {}};
      for (std::size_t zi = 0; zi < hz; ++zi) {
        for (std::size_t ti = 0; ti < ht; ++ti) {
          column.clear();
          for (std::size_t r = 0; r < config.replications; ++r) {
            const double v = heat_slots[r][(h * hz + zi) * ht + ti];
            if (!std::isnan(v)) column.push_back(v);
          }
          if (ti == 0) map.failures += config.replications - column.size();
          map.mean.values.push_back(column.empty() ? nan : mean_of(column));
        }
      }
      result.heatmaps.push_back(std::move(map));
    }
  }
  return result;
}

SurvivalGrid heatmap_difference(const SurvivalGrid& a, const SurvivalGrid& b) {
  if (a.t_grid != b.t_grid || a.z_grid != b.z_grid || a.values.size() != b.values.size() ||
      a.values.size() != a.t_grid.size() * a.z_grid.size()) {
    throw Error(ErrorCode::GridMismatch, "heatmap grids are not aligned");
  }
  SurvivalGrid d{a.t_grid, a.z_grid, std::vector<double>(a.values.size())};
  for (std::size_t i = 0; i < a.values.size(); ++i) d.values[i] = a.values[i] - b.values[i];
  return d;
}

std::vector<LoanRecord> generate_synthetic_loans(const LoanScenario& scenario) {
  using namespace std::chrono;
  // Quadrants (DtI 8-14 | 14-20) x (IR 6-9 | 9-12): sizes and default shares.
  struct Quadrant {
    double dti_lo, dti_hi, ir_lo, ir_hi, size, default_share;
  };
  constexpr std::array<Quadrant, 4> quadrants{{
      {8.0, 14.0, 6.0, 9.0, 2313.0, 0.061},
      {8.0, 14.0, 9.0, 12.0, 3022.0, 0.115},
      {14.0, 20.0, 6.0, 9.0, 1832.0, 0.070},
      {14.0, 20.0, 9.0, 12.0, 2963.0, 0.135},
  }};
  double total = 0.0;
  for (const auto& q : quadrants) total += q.size;

  const sys_days first_issue = sys_days{year{2014} / January / 1};
  const sys_days last_issue = sys_days{year{2018} / December / 31};
  const sys_days cutoff = sys_days{year{2020} / December / 31};
  const int issue_span = (last_issue - first_issue).count();
  constexpr int kTermDays = 1826;  // five years
  constexpr int kGraceDays = 30;

  std::vector<LoanRecord> loans;
  loans.reserve(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) {
    Substream rng(scenario.seed, 0, kLoanStream, static_cast<std::uint32_t>(i));
    double u = rng.uniform() * total;
    std::size_t qi = 0;
    while (qi + 1 < quadrants.size() && u >= quadrants[qi].size) u -= quadrants[qi++].size;
    const auto& q = quadrants[qi];
    LoanRecord loan{};
    loan.dti = q.dti_lo + (q.dti_hi - q.dti_lo) * rng.uniform();
    loan.ir = q.ir_lo + (q.ir_hi - q.ir_lo) * rng.uniform();
    loan.issue = first_issue + days{static_cast<int>(rng.uniform() * (issue_span + 1))};
    loan.cutoff = cutoff;
    const int horizon = std::min(kTermDays, static_cast<int>((cutoff - loan.issue).count()));
    const bool defaults = rng.uniform() < q.default_share;
    const double when = rng.uniform();
    if (defaults) {
      const int d = kGraceDays + static_cast<int>(when * (horizon - kGraceDays));
      loan.default_date = loan.issue + days{d};
      loan.last_payment = loan.issue + days{d - kGraceDays};
    } else {
      loan.last_payment = loan.issue + days{horizon};
    }
    loans.push_back(loan);
  }
  return loans;
}

}  // namespace ckm
