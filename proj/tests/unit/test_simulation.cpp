#include <cmath>
#include <vector>

#include "ckm/error.hpp"
#include "ckm/estimator.hpp"
#include "ckm/simulation.hpp"
#include "doctest.h"

using namespace ckm;

TEST_CASE("portfolio covariate laws") {
  DisabilityScenario s;
  s.n = 100000;
  s.seed = 42;
  const auto p = simulate_portfolio(s);
  double age = 0.0;
  std::size_t no_reports = 0;
  for (const auto& o : p.observations) {
    age += o.z[0];
    no_reports += o.z[1] == 0.0;
  }
  CHECK(std::abs(age / s.n - 50.0) < 0.15);
  CHECK(std::abs(static_cast<double>(no_reports) / s.n - std::exp(-0.3)) < 0.01);
}

TEST_CASE("latents explain every observation") {
  DisabilityScenario s;
  s.n = 5000;
  const auto p = simulate_portfolio(s, 3);
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto& o = p.observations[i];
    const auto& l = p.latents[i];
    CHECK(o.w == std::min({l.x, l.y, l.c}));
    CHECK(o.delta == (std::min(l.x, l.y) <= l.c ? 1 : 0));
    CHECK(l.c <= s.censor_upper);
  }
}

TEST_CASE("inverse transform reproduces the disability survival") {
  DisabilityScenario s;
  s.n = 100000;
  s.age_var = 1e-12;  // pin every age at the mean
  const auto p = simulate_portfolio(s, 1);
  for (double t : {2.0, 5.0, 10.0, 25.0, 40.0}) {
    std::size_t alive = 0;
    for (const auto& l : p.latents) alive += l.x > t;
    const double truth = true_survival_disability(t, s.age_mean, s);
    const double se = std::sqrt(truth * (1 - truth) / s.n);
    CHECK(std::abs(static_cast<double>(alive) / s.n - truth) < 3 * se);
  }
  CHECK(disability_quantile(true_survival_disability(7.5, 45.0), 45.0) ==
        doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("more contamination means fewer genuine reported events") {
  double prev = 1.0;
  for (double c1 : {0.02, 0.2, 2.0}) {
    DisabilityScenario s;
    s.n = 20000;
    s.c1 = c1;
    const auto p = simulate_portfolio(s);
    std::size_t events = 0, genuine = 0;
    for (std::size_t i = 0; i < s.n; ++i) {
      if (p.observations[i].delta == 1) {
        ++events;
        genuine += p.latents[i].x < p.latents[i].y;
      }
    }
    const double share = static_cast<double>(genuine) / events;
    CHECK(share < prev);
    prev = share;
  }
}

TEST_CASE("genuine share among events matches the true p") {
  DisabilityScenario s;
  s.n = 200000;
  const auto p = simulate_portfolio(s, 5);
  double expected = 0.0;
  std::size_t events = 0, genuine = 0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto& o = p.observations[i];
    if (o.delta != 1) continue;
    ++events;
    genuine += p.latents[i].x < p.latents[i].y;
    expected += true_p(o.w, o.z, s);
  }
  const double share = static_cast<double>(genuine) / events;
  const double mean_p = expected / events;
  CHECK(std::abs(share - mean_p) < 3 * std::sqrt(mean_p * (1 - mean_p) / events));
}

TEST_CASE("true survival values") {
  CHECK(std::abs(true_survival_disability(2.0, 45.0) - 0.9510) <= 5e-5);
  CHECK(std::abs(true_survival_disability(10.0, 55.0) - 0.7171) <= 5e-5);
  CHECK(true_survival_disability(0.0, 50.0) == 1.0);
  CHECK_THROWS_AS(true_survival_disability(-1.0, 50.0), Error);
}

TEST_CASE("true biased centers") {
  for (double t : {2.0, 5.0, 10.0}) {
    CHECK(true_biased_center(t, 50.0, 1.0) == true_survival_disability(t, 50.0));
  }
  CHECK(std::abs(true_biased_center(2.0, 45.0, 0.85) - 0.9480) <= 5e-4);
  CHECK(std::abs(true_biased_center(10.0, 55.0, 0.85) - 0.7059) <= 1e-3);
  CHECK(true_gamma(5.0, 50.0, 0.0) > true_gamma(5.0, 50.0, 0.5));
  CHECK(poisson_truncation(0.3) >= 5);
  CHECK_THROWS_AS(true_gamma(1.0, 50.0, 1.5), Error);
}

TEST_CASE("fits ignore how reportings are assigned") {
  DisabilityScenario s;
  s.n = 400;
  auto p = simulate_portfolio(s);
  judge_all(ExpertModel::perfect(true_p_function(s)), p.observations, s.seed, 0);
  auto permuted = p.observations;
  for (std::size_t i = 0; i + 1 < permuted.size(); i += 2) {
    std::swap(permuted[i].z[1], permuted[i + 1].z[1]);
  }
  const std::size_t col[] = {0};
  const KernelSpec k1(1, Kernel::truncated_gaussian());
  const auto bw = BandwidthMatrix::schedule(s.n, 1, 0.3);
  const double z0[] = {50.0};
  const auto a = fit_conditional_km(project_covariates(p.observations, col), true, k1, bw, z0);
  const auto b = fit_conditional_km(project_covariates(permuted, col), true, k1, bw, z0);
  for (double t = 0.0; t < 50.0; t += 0.5) CHECK(a.F.value(t) == b.F.value(t));
}

TEST_CASE("monte carlo smoke study") {
  McStudyConfig c;
  c.scenario.n = 50;
  c.scenario.seed = 9;
  c.replications = 2;
  c.experts = {{"perfect", 1.0}, {"partial", 0.85}, {"naive", 0.0}};
  c.z_points = {45.0, 55.0};
  c.t_points = {2.0, 5.0, 10.0};
  c.heatmap = HeatmapSpec{{0.0, 10.0, 20.0}, {40.0, 50.0, 60.0}, {"naive", "perfect"}};
  const auto r = run_mc_study(c);
  REQUIRE(r.cells.size() == 2 * 3 * 3);
  for (const auto& cell : r.cells) {
    CHECK(cell.replications + cell.failures == 2);
    if (cell.replications == 2) {
      CHECK(std::isfinite(cell.mean));
      CHECK(std::isfinite(cell.sd));
    }
    CHECK(std::isfinite(cell.true_center));
    CHECK(std::isfinite(cell.true_sd));
  }
  CHECK(r.cells[0].expert == "perfect");
  CHECK(r.cells[3].expert == "partial");
  REQUIRE(r.heatmaps.size() == 2);
  REQUIRE(r.truth);
  CHECK(r.heatmaps[0].mean.values.size() == 9);
  c.threads = 2;
  const auto again = run_mc_study(c);
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    CHECK((r.cells[i].mean == again.cells[i].mean ||
           (std::isnan(r.cells[i].mean) && std::isnan(again.cells[i].mean))));
  }
  c.replications = 1;
  CHECK_THROWS_AS(run_mc_study(c), Error);
}

TEST_CASE("heatmap differences") {
  const SurvivalGrid a{{0.0, 1.0}, {40.0}, {1.0, 0.9}};
  const auto zero = heatmap_difference(a, a);
  for (double v : zero.values) CHECK(v == 0.0);
  const SurvivalGrid b{{0.0, 2.0}, {40.0}, {1.0, 0.9}};
  CHECK_THROWS_AS(heatmap_difference(a, b), Error);
}

TEST_CASE("synthetic loans") {
  const auto loans = generate_synthetic_loans({});
  REQUIRE(loans.size() == 10130);
  std::size_t defaults_low = 0, low = 0, defaults_high = 0, high = 0;
  for (const auto& l : loans) {
    CHECK(l.dti >= 8.0);
    CHECK(l.dti <= 20.0);
    CHECK(l.ir >= 6.0);
    CHECK(l.ir <= 12.0);
    CHECK(l.last_payment >= l.issue);
    CHECK(l.last_payment <= l.cutoff);
    if (l.default_date) CHECK(*l.default_date <= l.cutoff);
    if (l.ir < 9.0) {
      ++low;
      defaults_low += l.default_date.has_value();
    } else {
      ++high;
      defaults_high += l.default_date.has_value();
    }
  }
  CHECK(static_cast<double>(defaults_low) / low < static_cast<double>(defaults_high) / high);
}
