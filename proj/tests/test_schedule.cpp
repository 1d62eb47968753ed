#include <doctest.h>

#include <random>
#include <stdexcept>

#include "echo/schedule.hpp"

using namespace echo;

TEST_CASE("linear schedule: single step") {
  NoiseSchedule s = make_linear_schedule(1, 0.5, 0.5);
  REQUIRE(s.alpha_bar.size() == 2);
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.alpha_bar[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("linear schedule: two-step hand product") {
  NoiseSchedule s = make_linear_schedule(2, 0.1, 0.3);
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.alpha_bar[1] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.alpha_bar[2] == doctest::Approx(0.63).epsilon(1e-15));
  CHECK(alpha_bar_at(s, 2) == doctest::Approx(0.63).epsilon(1e-15));
}

TEST_CASE("linear schedule: default 1000-step tail vs direct product") {
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  // Independent left fold over the stored betas.
  long double prod = 1.0L;
  for (double b : s.beta) prod *= (1.0L - static_cast<long double>(b));
  double expected = static_cast<double>(prod);
  CHECK(std::abs(s.alpha_bar[1000] - expected) <= 1e-12 * expected);
  CHECK(expected > 1e-5);
  CHECK(expected < 1e-4);
}

TEST_CASE("schedule rejects bad parameters") {
  CHECK_THROWS_AS(make_linear_schedule(0, 0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(make_linear_schedule(-3, 0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(make_linear_schedule(10, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(make_linear_schedule(10, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_linear_schedule(10, 0.3, 0.1), std::invalid_argument);
}

TEST_CASE("alpha_bar_at bounds and monotonicity") {
  NoiseSchedule s = make_linear_schedule(50, 1e-3, 0.1);
  CHECK(alpha_bar_at(s, 0) == 1.0);
  CHECK_THROWS_AS(alpha_bar_at(s, -1), std::out_of_range);
  CHECK_THROWS_AS(alpha_bar_at(s, 51), std::out_of_range);
  for (int t = 1; t <= 50; ++t)
    CHECK(alpha_bar_at(s, t) < alpha_bar_at(s, t - 1));
  CHECK(alpha_bar_at(s, 50) > 0.0);
}

TEST_CASE("schedule property: cumulative product matches left fold") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> b0(1e-5, 0.01), b1(0.01, 0.5);
  std::uniform_int_distribution<int> t_dist(1, 400);
  for (int rep = 0; rep < 20; ++rep) {
    int total = t_dist(rng);
    NoiseSchedule s = make_linear_schedule(total, b0(rng), b1(rng));
    double prod = 1.0;
    for (int t = 1; t <= total; ++t) {
      prod *= 1.0 - s.beta[static_cast<std::size_t>(t - 1)];
      CHECK(std::abs(s.alpha_bar[static_cast<std::size_t>(t)] - prod) <=
            1e-12 * prod);
      CHECK(s.alpha_bar[static_cast<std::size_t>(t)] <
            s.alpha_bar[static_cast<std::size_t>(t - 1)]);
    }
  }
}

TEST_CASE("make_grid: arithmetic and edge cases") {
  TimestepGrid g = make_grid(1000, 4);
  CHECK(g.stride == 250);
  CHECK(g.steps == std::vector<int>{1000, 750, 500, 250});

  TimestepGrid one = make_grid(10, 1);
  CHECK(one.steps == std::vector<int>{10});

  TimestepGrid identity = make_grid(1000, 1000);
  CHECK(identity.stride == 1);
  CHECK(identity.steps.size() == 1000);
  CHECK(identity.steps.front() == 1000);
  CHECK(identity.steps.back() == 1);

  CHECK_THROWS_AS(make_grid(1000, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(10, 0), std::invalid_argument);
}

TEST_CASE("grid nesting: every student step lies on the teacher grid") {
  TimestepGrid student = make_grid(1000, 10);
  TimestepGrid teacher = make_grid(1000, 200);
  for (int t : student.steps) CHECK(teacher.contains(t));
  CHECK_FALSE(teacher.contains(3));
  CHECK_FALSE(teacher.contains(0));
  CHECK_FALSE(teacher.contains(1005));
}
