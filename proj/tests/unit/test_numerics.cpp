#include <cmath>
#include <numbers>

#include "ckm/error.hpp"
#include "ckm/numerics.hpp"
#include "ckm/rng.hpp"
#include "doctest.h"

using namespace ckm;

TEST_CASE("normal quantile inverts the erfc-based cdf") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.7, 0.99, 1 - 1e-9}) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-8 * std::max(p, 1e-4));
  }
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK(std::isinf(normal_quantile(1.0)));
  CHECK_THROWS_AS(normal_quantile(1.5), Error);
}

TEST_CASE("adaptive simpson") {
  const auto r = adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(integrate([](double x) { return x * x; }, 0.0, 3.0, 1e-12) ==
        doctest::Approx(9.0).epsilon(1e-12));
  CHECK(integrate([](double) { return 1.0; }, 2.0, 2.0) == 0.0);
}

TEST_CASE("philox known answers") {
  using Block = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                   {0xffffffff, 0xffffffff}) ==
        Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                   {0xa4093822, 0x299f31d0}) ==
        Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("substreams are addressable and distinct") {
  Substream a(7, 3, kPortfolioStream, 11);
  Substream b(7, 3, kPortfolioStream, 11);
  Substream c(7, 3, kExpertStream, 11);
  Substream d(7, 4, kPortfolioStream, 11);
  for (int i = 0; i < 20; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
}

TEST_CASE("distribution moments") {
  const int n = 200000;
  double u_sum = 0.0, e_sum = 0.0, z_sum = 0.0, z2_sum = 0.0;
  int zeros = 0;
  double u_min = 1.0, u_max = 0.0;
  for (int i = 0; i < n; ++i) {
    Substream s(99, 0, 1, static_cast<std::uint32_t>(i));
    const double u = s.uniform();
    u_min = std::min(u_min, u);
    u_max = std::max(u_max, u);
    u_sum += u;
    e_sum += s.exponential(2.0);
    const double z = s.normal(50.0, 10.0);
    z_sum += z;
    z2_sum += (z - 50.0) * (z - 50.0);
    zeros += s.poisson(0.3) == 0;
  }
  CHECK(u_min > 0.0);
  CHECK(u_max < 1.0);
  CHECK(u_sum / n == doctest::Approx(0.5).epsilon(0.005));
  CHECK(e_sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(z_sum / n - 50.0) < 0.1);
  CHECK(z2_sum / n == doctest::Approx(100.0).epsilon(0.02));
  CHECK(static_cast<double>(zeros) / n == doctest::Approx(std::exp(-0.3)).epsilon(0.01));
}
