#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "echo/guidance.hpp"
#include "echo/toyworld.hpp"
#include "fakes.hpp"
#include "oracles.hpp"

using namespace echo;

TEST_CASE("cfg_epsilon: omega 0 collapses to the conditional prediction") {
  std::mt19937 rng(31);
  MixtureModel world = test::random_mixture(rng, 2, 2);
  NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
  AnalyticTeacher model(world, s);
  LatentVideo z = test::random_latent(rng, 2, 2);

  LatentVideo with_cfg = cfg_epsilon(model, z, ConditionLabel::named("a"), 40, 0.0);
  LatentVideo cond = model.predict_epsilon(z, ConditionLabel::named("a"), 40);
  CHECK((with_cfg.array() == cond.array()).all());
}

TEST_CASE("cfg_epsilon: cancellation when both prompts agree") {
  NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.05);
  LatentVideo common = LatentVideo::Constant(2, 2, 0.4);
  test::ConstantDenoiser model(s, common, common);
  LatentVideo z = LatentVideo::Zero(2, 2);
  for (double omega : {0.0, 1.0, 7.5, 100.0}) {
    LatentVideo out = cfg_epsilon(model, z, ConditionLabel::named("x"), 5, omega);
    CHECK((out - common).norm() <= 1e-12 * common.norm());
  }
}

TEST_CASE("cfg_epsilon: scalar probe") {
  NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.05);
  test::ConstantDenoiser model(s, LatentVideo::Constant(1, 1, 1.0),
                               LatentVideo::Constant(1, 1, 0.5));
  LatentVideo z = LatentVideo::Zero(1, 1);
  LatentVideo out = cfg_epsilon(model, z, ConditionLabel::named("x"), 5, 7.5);
  CHECK(out(0, 0) == doctest::Approx(4.75).epsilon(1e-15));
}

TEST_CASE("cfg_epsilon: exactly two evaluations per call") {
  NoiseSchedule s = make_linear_schedule(10, 1e-3, 0.05);
  test::ConstantDenoiser model(s, LatentVideo::Constant(1, 1, 1.0),
                               LatentVideo::Constant(1, 1, 0.5));
  LatentVideo z = LatentVideo::Zero(1, 1);
  CHECK(model.evals() == 0);
  cfg_epsilon(model, z, ConditionLabel::named("x"), 5, 3.0);
  CHECK(model.evals() == 2);
  cfg_epsilon(model, z, ConditionLabel::named("x"), 5, 0.0);
  CHECK(model.evals() == 4);
}

TEST_CASE("cfg_epsilon: affine in omega") {
  std::mt19937 rng(32);
  MixtureModel world = test::random_mixture(rng, 3, 2);
  NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
  AnalyticTeacher model(world, s);
  LatentVideo z = test::random_latent(rng, 3, 2);
  ConditionLabel c = ConditionLabel::named("a");

  for (auto [w1, w2] : {std::pair{1.0, 2.5}, std::pair{0.3, 7.5}}) {
    LatentVideo lhs = cfg_epsilon(model, z, c, 40, w1) +
                      cfg_epsilon(model, z, c, 40, w2) -
                      cfg_epsilon(model, z, c, 40, 0.0);
    LatentVideo rhs = cfg_epsilon(model, z, c, 40, w1 + w2);
    CHECK((lhs - rhs).norm() <= 1e-12 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("guided_epsilon algebra") {
  LatentVideo eps = LatentVideo::Constant(1, 1, 2.0);
  LatentVideo grad = LatentVideo::Constant(1, 1, 0.001);

  CHECK(guided_epsilon(eps, grad, 0.0)(0, 0) == 2.0);
  CHECK(guided_epsilon(eps, LatentVideo::Zero(1, 1), 123.0)(0, 0) == 2.0);
  CHECK(guided_epsilon(eps, grad, 1000.0)(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(guided_epsilon(eps, LatentVideo::Zero(2, 2), 1.0),
                  std::invalid_argument);
}

TEST_CASE("renoise: boundary and deterministic mode") {
  NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
  LatentVideo x0 = LatentVideo::Constant(2, 2, 3.0);

  RngStream stream(9, "noise");
  GaussianSource noisy{&stream, false};
  LatentVideo at_zero = renoise(x0, 0, s, noisy);
  CHECK((at_zero.array() == x0.array()).all());

  GaussianSource det{nullptr, true};
  LatentVideo scaled = renoise(x0, 40, s, det);
  CHECK((scaled - std::sqrt(alpha_bar_at(s, 40)) * x0).norm() <= 1e-15);
}

TEST_CASE("renoise: sample moments at fixed x0") {
  NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
  const int t = 60;
  const double ab = alpha_bar_at(s, t);
  LatentVideo x0(1, 2);
  x0 << 1.0, -2.0;

  RngStream stream(1234, "noise");
  GaussianSource src{&stream, false};
  const int n = 10000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d sq = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    LatentVideo z = renoise(x0, t, s, src);
    mean += z.row(0).transpose();
    sq += z.row(0).transpose().cwiseProduct(z.row(0).transpose());
  }
  mean /= n;
  Eigen::Vector2d target = std::sqrt(ab) * x0.row(0).transpose();
  Eigen::Vector2d var =
      (sq - n * mean.cwiseProduct(mean)) / static_cast<double>(n - 1);

  double se = std::sqrt((1.0 - ab) / n);
  for (int d = 0; d < 2; ++d) {
    CHECK(std::abs(mean[d] - target[d]) <= 3.0 * se);
    CHECK(std::abs(var[d] - (1.0 - ab)) <= 0.05 * (1.0 - ab));
  }
}

TEST_CASE("renoise then one_step_x0 with the same draw recovers x0") {
  NoiseSchedule s = make_linear_schedule(100, 1e-3, 0.05);
  std::mt19937 rng(33);
  LatentVideo x0 = test::random_latent(rng, 3, 2, 2.0);
  for (int t : {1, 25, 100}) {
    // Clone the stream so the test sees the exact noise renoise will draw.
    RngStream a(77, "noise");
    RngStream b(77, "noise");
    LatentVideo eps = a.normal_matrix(3, 2);
    GaussianSource src{&b, false};
    LatentVideo z = renoise(x0, t, s, src);
    LatentVideo rec = one_step_x0(z, eps, t, s);
    CHECK((rec - x0).norm() <= 1e-10 * std::max(1.0, x0.norm()));
  }
}

TEST_CASE("interpolate_x0: endpoints, scalar case, bracketing") {
  std::mt19937 rng(34);
  LatentVideo a = test::random_latent(rng, 2, 3);
  LatentVideo b = test::random_latent(rng, 2, 3);

  CHECK((interpolate_x0(a, b, 0.0).array() == a.array()).all());
  CHECK((interpolate_x0(a, b, 1.0).array() == b.array()).all());

  LatentVideo lo = LatentVideo::Zero(1, 1);
  LatentVideo hi = LatentVideo::Constant(1, 1, 1.0);
  CHECK(interpolate_x0(lo, hi, 0.3)(0, 0) == doctest::Approx(0.3).epsilon(1e-15));

  LatentVideo mid = interpolate_x0(a, b, 0.42);
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      double lo_v = std::min(a(r, c), b(r, c));
      double hi_v = std::max(a(r, c), b(r, c));
      CHECK(mid(r, c) >= lo_v - 1e-15);
      CHECK(mid(r, c) <= hi_v + 1e-15);
    }

  CHECK_THROWS_AS(interpolate_x0(a, b, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(interpolate_x0(a, b, -0.1), std::invalid_argument);
}

TEST_CASE("guidance config validation") {
  GuidanceConfig good;
  good.delta1 = 1.0;
  good.delta2 = 0.5;
  CHECK(good.validate().empty());

  GuidanceConfig warn = good;
  warn.delta2 = 2.0;
  CHECK(warn.validate().size() == 1);

  GuidanceConfig bad = good;
  bad.lambda = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.eta = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.window = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.n_max = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = good;
  bad.inner_start_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
