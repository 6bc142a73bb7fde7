#include <sstream>

#include "ckm/curves.hpp"
#include "ckm/error.hpp"
#include "doctest.h"

using ckm::StepCurve;

TEST_CASE("value is right-continuous") {
  const auto c = StepCurve::from_jumps({1.0}, {0.5});
  CHECK(c.value(1.0) == 0.5);
  CHECK(c.value(0.99) == 0.0);
  const auto d = StepCurve::from_jumps({1.0, 3.0}, {0.5, 0.25});
  CHECK(d.value(2.0) == 0.5);
  CHECK(d.value(3.0) == 0.75);
}

TEST_CASE("value_left is the left limit") {
  const auto c = StepCurve::from_jumps({1.0}, {0.5});
  CHECK(c.value_left(1.0) == 0.0);
  CHECK(c.value_left(1.5) == 0.5);
  const auto empty = StepCurve::from_jumps({}, {}, 0.3);
  CHECK(empty.value_left(7.0) == 0.3);
  CHECK(empty.value(7.0) == 0.3);
}

TEST_CASE("stieltjes sums") {
  const auto c = StepCurve::from_jumps({1.0, 2.0}, {0.3, 0.4});
  auto one = [](double) { return 1.0; };
  CHECK(ckm::stieltjes_integral(one, c, 2.0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(ckm::stieltjes_integral(one, c, 1.5) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(ckm::stieltjes_integral([](double s) { return s; }, c, 2.0) ==
        doctest::Approx(1.1).epsilon(1e-15));
}

TEST_CASE("jump identity and monotonicity") {
  const auto c = StepCurve::from_jumps({0.5, 1.0, 4.0}, {0.1, 0.2, 0.3}, 0.05, true);
  for (double t : {0.0, 0.5, 0.7, 1.0, 2.0, 4.0, 9.0}) {
    CHECK(c.value(t) - c.value_left(t) == doctest::Approx(c.jump_at(t)).epsilon(1e-15));
    CHECK(ckm::stieltjes_integral([](double) { return 1.0; }, c, t) ==
          doctest::Approx(c.value(t) - c.baseline()).epsilon(1e-15));
  }
  double prev = c.value(0.0);
  for (double t = 0.0; t < 5.0; t += 0.05) {
    CHECK(c.value(t) >= prev);
    prev = c.value(t);
  }
}

TEST_CASE("from_values round trips increments") {
  const auto c = StepCurve::from_values({1.0, 2.0}, {0.25, 0.75});
  CHECK(c.jump_at(2.0) == 0.5);
  CHECK(c.final_value() == 0.75);
}

TEST_CASE("construction rejects bad input") {
  CHECK_THROWS_AS(StepCurve::from_jumps({2.0, 1.0}, {0.1, 0.1}), ckm::Error);
  CHECK_THROWS_AS(StepCurve::from_jumps({1.0, 1.0}, {0.1, 0.1}), ckm::Error);
  CHECK_THROWS_AS(StepCurve::from_jumps({-1.0}, {0.1}), ckm::Error);
  CHECK_THROWS_AS(StepCurve::from_jumps({1.0}, {-0.1}, 0.0, true), ckm::Error);
  CHECK_THROWS_AS(StepCurve::from_jumps({1.0}, {0.1, 0.2}), ckm::Error);
}

TEST_CASE("truncation, sampling and tables") {
  const auto c = StepCurve::from_jumps({1.0, 2.0, 3.0}, {0.1, 0.2, 0.3});
  const auto t = c.truncated(2.0);
  CHECK(t.size() == 2);
  CHECK(t.final_value() == doctest::Approx(0.3));
  const double grid[] = {0.0, 1.5, 3.0};
  const auto s = c.sample(grid);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(0.1));
  CHECK(s[2] == doctest::Approx(0.6));
  std::ostringstream os;
  t.write_table(os);
  CHECK(os.str().rfind("time,value\n0,0\n1,", 0) == 0);
}
