#include <cmath>
#include <random>
#include <vector>

#include "ckm/error.hpp"
#include "ckm/estimator.hpp"
#include "doctest.h"
#include "../support/oracles.hpp"

using namespace ckm;

namespace {

const KernelSpec k1(1, Kernel::truncated_gaussian());
const auto b1 = BandwidthMatrix::uniform(1, 1.0);
const double origin[] = {0.0};

std::vector<Observation> flat(std::initializer_list<std::tuple<double, int, int>> rows) {
  std::vector<Observation> out;
  for (auto [w, d, e] : rows) out.push_back({w, d, {0.0}, e});
  return out;
}

}  // namespace

TEST_CASE("density estimate") {
  const auto one = flat({{1.0, 1, 1}});
  CHECK(density_estimate(one, k1, b1, origin) == doctest::Approx(0.41796).epsilon(1e-4));
  const auto two = flat({{1.0, 1, 1}, {2.0, 0, 0}});
  CHECK(density_estimate(two, k1, b1, origin) == doctest::Approx(0.41796).epsilon(1e-4));
  const double far[] = {10.0};
  CHECK(density_estimate(two, k1, b1, far) == 0.0);
}

TEST_CASE("h estimate") {
  const auto three = flat({{1.0, 1, 1}, {2.0, 0, 0}, {3.0, 1, 1}});
  const auto H = h_estimate(three, k1, b1, origin);
  for (double t : {1.0, 2.0, 3.0}) CHECK(H.jump_at(t) == doctest::Approx(1.0 / 3.0));
  CHECK(H.final_value() == doctest::Approx(1.0));

  const auto single = flat({{4.0, 0, 0}});
  const auto Hs = h_estimate(single, k1, b1, origin);
  CHECK(Hs.size() == 1);
  CHECK(Hs.jump_at(4.0) == 1.0);

  // Second point just inside the support edge.
  std::vector<Observation> pair{{1.0, 1, {0.0}, 1}, {2.0, 1, {1.9999999}, 1}};
  const double k0 = oracle::kernel_value(0.0);
  const double kedge = oracle::kernel_value(1.9999999);
  const auto Hp = h_estimate(pair, k1, b1, origin);
  CHECK(Hp.jump_at(1.0) == doctest::Approx(k0 / (k0 + kedge)).epsilon(1e-12));
  CHECK(Hp.jump_at(1.0) == doctest::Approx(0.8808).epsilon(1e-3));
  CHECK(Hp.jump_at(2.0) == doctest::Approx(0.1192).epsilon(1e-2));

  const double far[] = {10.0};
  CHECK_THROWS_AS(h_estimate(pair, k1, b1, far), Error);
}

TEST_CASE("h1 expert estimate") {
  const auto three = flat({{1.0, 1, 1}, {2.0, 0, 0}, {3.0, 1, 1}});
  const auto H1 = h1_expert_estimate(three, k1, b1, origin);
  CHECK(H1.jump_at(1.0) == doctest::Approx(1.0 / 3.0));
  CHECK(H1.jump_at(2.0) == 0.0);
  CHECK(H1.jump_at(3.0) == doctest::Approx(1.0 / 3.0));

  const auto none = flat({{1.0, 1, 0}, {2.0, 1, 0}});
  CHECK(h1_expert_estimate(none, k1, b1, origin).final_value() == 0.0);

  auto missing = three;
  missing[1].eta.reset();
  CHECK_THROWS_AS(h1_expert_estimate(missing, k1, b1, origin), Error);

  const std::vector<double> w(three.size(), 1.0);
  const auto naive = weighted_subdistribution(three, w, Judgments::Naive);
  CHECK(naive.jump_at(1.0) == H1.jump_at(1.0));
  CHECK(naive.jump_at(3.0) == H1.jump_at(3.0));
}

TEST_CASE("expert nelson aalen and product integral") {
  const auto three = flat({{1.0, 1, 1}, {2.0, 0, 0}, {3.0, 1, 1}});
  const auto H = h_estimate(three, k1, b1, origin);
  const auto H1 = h1_expert_estimate(three, k1, b1, origin);
  const auto na = nelson_aalen_expert(H, H1);
  CHECK(na.hazard.jump_at(1.0) == doctest::Approx(1.0 / 3.0));
  CHECK(na.hazard.jump_at(3.0) == doctest::Approx(1.0));
  CHECK_FALSE(na.truncated_at);

  const auto F = product_integral(na.hazard);
  CHECK(1.0 - F.value(1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(1.0 - F.value(2.9) == doctest::Approx(2.0 / 3.0));
  CHECK(1.0 - F.value(3.0) == doctest::Approx(0.0));

  const auto single = flat({{2.0, 1, 1}});
  const auto ns = nelson_aalen_expert(h_estimate(single, k1, b1, origin),
                                      h1_expert_estimate(single, k1, b1, origin));
  CHECK(ns.hazard.jump_at(2.0) == 1.0);

  CHECK(product_integral(StepCurve{}).value(10.0) == 0.0);
  CHECK(product_integral(StepCurve::from_jumps({1.0}, {1.0})).value(1.0) == 1.0);
  CHECK_THROWS_AS(product_integral(StepCurve::from_jumps({1.0}, {1.5})), Error);
}

TEST_CASE("nelson aalen reports the denominator guard") {
  const auto H = StepCurve::from_jumps({1.0, 2.0}, {1.0, 0.0});
  const auto H1 = StepCurve::from_jumps({1.0}, {0.5});
  // After t = 1 nobody is at risk; a later H1 jump cannot be divided.
  const auto H1_late = StepCurve::from_jumps({1.0, 2.0}, {0.5, 1e-3});
  const auto ok = nelson_aalen_expert(H, H1);
  CHECK(ok.hazard.jump_at(1.0) == 0.5);
  const auto cut = nelson_aalen_expert(H, H1_late);
  REQUIRE(cut.truncated_at);
  CHECK(*cut.truncated_at == 2.0);
  CHECK(cut.hazard.value(5.0) == 0.5);
}

TEST_CASE("naive fit on constant covariates is the classical product limit") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 30; ++rep) {
    auto data = oracle::random_censored(gen, 5 + rep * 3, 1, 0.0);
    const auto fit = fit_conditional_km(data, false, k1, b1, origin);
    for (double t = 0.0; t <= 7.0; t += 0.25) {
      CHECK(std::abs(fit.survival(t) - oracle::kaplan_meier_survival(data, t)) <= 1e-12);
    }
  }
}

TEST_CASE("fit properties") {
  std::mt19937_64 gen(17);
  auto data = oracle::random_censored(gen, 60, 1, 1.5);

  SUBCASE("all judgments zero leave survival at one") {
    auto none = data;
    for (auto& o : none) o.eta = 0;
    const auto fit = fit_conditional_km(none, true, k1, b1, origin);
    CHECK(fit.survival(100.0) == 1.0);
  }
  SUBCASE("fewer accepted events never raise F") {
    auto fewer = data;
    for (std::size_t i = 0; i < fewer.size(); i += 3) fewer[i].eta = 0;
    const auto more = fit_conditional_km(data, true, k1, b1, origin);
    const auto less = fit_conditional_km(fewer, true, k1, b1, origin);
    for (double t = 0.0; t <= 7.0; t += 0.1) CHECK(less.F.value(t) <= more.F.value(t) + 1e-15);
  }
  SUBCASE("scale invariance of weights") {
    const auto w = kernel_weights(data, k1, b1, origin);
    auto w2 = w;
    for (auto& v : w2) v *= 8.0;  // power of two keeps ratios exact
    const auto a = fit_from_weights(data, w, Judgments::Expert, 1.0, origin);
    const auto b = fit_from_weights(data, w2, Judgments::Expert, 1.0, origin);
    for (double t = 0.0; t <= 7.0; t += 0.5) CHECK(a.F.value(t) == b.F.value(t));
  }
  SUBCASE("hazard jumps stay in the unit interval") {
    const auto fit = fit_conditional_km(data, true, k1, b1, origin);
    for (double j : fit.Lambda.jump_sizes()) {
      CHECK(j >= 0.0);
      CHECK(j <= 1.0);
    }
    for (double s : fit.H.jump_times()) CHECK(1.0 - fit.H.value_left(s) >= fit.H.jump_at(s) - 1e-15);
    CHECK(fit.n == data.size());
    CHECK(fit.g_hat > 0.0);
    CHECK(fit.n_effective > 0.0);
  }
}
