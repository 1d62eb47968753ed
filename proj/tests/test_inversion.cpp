#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "echo/inversion.hpp"
#include "oracles.hpp"

using namespace echo;

namespace {

MixtureModel two_basin_world(Eigen::Index frames, Eigen::Index dim) {
  LatentVideo mu(frames, dim);
  for (Eigen::Index f = 0; f < frames; ++f)
    for (Eigen::Index d = 0; d < dim; ++d)
      mu(f, d) = 0.2 * static_cast<double>(f) - 0.1 * static_cast<double>(d);
  MixtureComponent a{0.6, mu, 1.0, "fwd"};
  MixtureComponent b{0.4, -mu, 1.0, "bwd"};
  return MixtureModel({a, b});
}

}  // namespace

TEST_CASE("ddim_invert: origin is a fixed point in a symmetric world") {
  MixtureComponent c{1.0, LatentVideo::Zero(2, 2), 1.0, "only"};
  MixtureModel world({c});
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  AnalyticTeacher teacher(world, s);
  TimestepGrid grid = make_grid(1000, 100);

  InversionResult inv = ddim_invert(teacher, LatentVideo::Zero(2, 2),
                                    ConditionLabel::unconditional(), grid, 500);
  CHECK(inv.z_T.norm() == 0.0);
  CHECK(inv.z_at.norm() == 0.0);
}

TEST_CASE("ddim_invert: determinism and record_at validation") {
  std::mt19937 rng(41);
  MixtureModel world = two_basin_world(3, 2);
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  AnalyticTeacher teacher(world, s);
  TimestepGrid grid = make_grid(1000, 200);
  LatentVideo z0 = test::random_latent(rng, 3, 2);

  InversionResult a =
      ddim_invert(teacher, z0, ConditionLabel::unconditional(), grid, 400);
  InversionResult b =
      ddim_invert(teacher, z0, ConditionLabel::unconditional(), grid, 400);
  CHECK((a.z_T.array() == b.z_T.array()).all());
  CHECK((a.z_at.array() == b.z_at.array()).all());

  CHECK_THROWS_AS(
      ddim_invert(teacher, z0, ConditionLabel::unconditional(), grid, 401),
      std::invalid_argument);
}

TEST_CASE("ddim_invert: one-step grid matches the hand formula") {
  std::mt19937 rng(42);
  MixtureModel world = two_basin_world(2, 2);
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  AnalyticTeacher teacher(world, s);
  TimestepGrid grid = make_grid(1000, 1);
  LatentVideo z0 = test::random_latent(rng, 2, 2);

  InversionResult inv =
      ddim_invert(teacher, z0, ConditionLabel::unconditional(), grid, 1000);
  // Single hop from t = 0: eps is zero there, so z_T = sqrt(ab_T) * z0.
  double ab = alpha_bar_at(s, 1000);
  CHECK((inv.z_T - std::sqrt(ab) * z0).norm() <= 1e-14);
}

TEST_CASE("ddim round trip improves with finer grids") {
  MixtureModel world = two_basin_world(3, 2);
  // First-order DDIM round trips contract by roughly sum(dtheta^2) in the
  // theta = arccos(sqrt(alpha_bar)) parametrization, so the tolerance needs a
  // schedule whose terminal alpha_bar keeps the theta path moderate.
  NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.003);
  AnalyticTeacher teacher(world, s);

  std::mt19937 rng(43);
  std::vector<int> grid_sizes{10, 50, 200};
  std::vector<double> medians;
  for (int n : grid_sizes) {
    TimestepGrid grid = make_grid(1000, n);
    std::vector<double> errors;
    for (int rep = 0; rep < 9; ++rep) {
      RngStream ref_rng(static_cast<std::uint64_t>(100 + rep), "reference");
      MotionParams motion;
      motion.drift = Eigen::Vector2d(0.1, -0.05);
      motion.ar = 1.0;
      motion.noise_scale = 0.05;
      LatentVideo z0 = sample_reference(world, motion, 3, 2, ref_rng);
      InversionResult inv = ddim_invert(teacher, z0,
                                        ConditionLabel::unconditional(), grid,
                                        grid.steps.front());
      LatentVideo back =
          ddim_sample(teacher, inv.z_T, ConditionLabel::unconditional(), grid);
      errors.push_back((back - z0).norm() / z0.norm());
    }
    std::sort(errors.begin(), errors.end());
    medians.push_back(errors[errors.size() / 2]);
  }
  CHECK(medians[2] < 1e-2);
  CHECK(medians[0] > medians[1]);
  CHECK(medians[1] > medians[2]);
}

TEST_CASE("blend_init: endpoints and the deterministic case") {
  LatentVideo ref = LatentVideo::Constant(2, 2, 2.0);

  RngStream stream(5, "init");
  GaussianSource src{&stream, false};
  LatentVideo keep = blend_init(ref, 1.0, src);
  CHECK((keep.array() == ref.array()).all());

  RngStream s2(5, "init");
  RngStream s3(5, "init");
  GaussianSource src_fresh{&s2, false};
  LatentVideo fresh = blend_init(ref, 0.0, src_fresh);
  LatentVideo expected_eps = s3.normal_matrix(2, 2);
  CHECK((fresh.array() == expected_eps.array()).all());

  GaussianSource det{nullptr, true};
  LatentVideo halved = blend_init(ref, 0.25, det);
  CHECK((halved - LatentVideo::Constant(2, 2, 1.0)).norm() <= 1e-15);

  CHECK_THROWS_AS(blend_init(ref, -0.1, det), std::invalid_argument);
  CHECK_THROWS_AS(blend_init(ref, 1.1, det), std::invalid_argument);
}

TEST_CASE("blend_init preserves unit variance") {
  RngStream ref_stream(6, "ref-noise");
  RngStream blend_stream(7, "init");
  GaussianSource src{&blend_stream, false};

  const int n = 10000;
  const double k = 0.3;
  double sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    LatentVideo z_ref = ref_stream.normal_matrix(1, 4);
    LatentVideo z = blend_init(z_ref, k, src);
    for (Eigen::Index d = 0; d < 4; ++d) {
      sum += z(0, d);
      sum_sq += z(0, d) * z(0, d);
      ++count;
    }
  }
  double mean = sum / count;
  double var = (sum_sq - count * mean * mean) / (count - 1);
  CHECK(var >= 0.95);
  CHECK(var <= 1.05);
}
