#pragma once

// Shared toy worlds for sampler-level tests.

#include <memory>

#include "echo/echo_sampler.hpp"
#include "echo/experiment.hpp"

namespace echo::test {

struct SamplerFixture {
  NoiseSchedule schedule;
  TimestepGrid student_grid;
  TimestepGrid teacher_grid;
  MixtureModel mixture;
  std::unique_ptr<AnalyticTeacher> teacher;
  std::unique_ptr<DistilledStudent> student;
  LatentVideo reference;
  ReferenceBundle bundle;
  GuidanceConfig config;
  ConditionLabel condition;

  RunInputs inputs() const {
    return RunInputs{*student,     *teacher,      bundle,
                     condition,    student_grid,  teacher_grid};
  }

  // Fresh models so evaluation counters start at zero.
  void reset_models() {
    teacher = std::make_unique<AnalyticTeacher>(mixture, schedule);
    student = std::make_unique<DistilledStudent>(mixture, schedule,
                                                 student_grid, perturbation);
  }

  StudentPerturbation perturbation;
};

struct FixtureOptions {
  int total_steps = 1000;
  int student_steps = 5;
  int teacher_steps = 50;
  double beta_end = 0.01;
  Eigen::Index frames = 4;
  Eigen::Index dim = 2;
  double bias_amplitude = 0.3;
  std::uint64_t reference_seed = 11;
  FeatureMode feature_mode = FeatureMode::kPredictedClean;
};

inline SamplerFixture make_fixture(const FixtureOptions& opt = {}) {
  LatentVideo mu(opt.frames, opt.dim);
  for (Eigen::Index f = 0; f < opt.frames; ++f)
    for (Eigen::Index d = 0; d < opt.dim; ++d)
      mu(f, d) = 0.25 * static_cast<double>(f) - 0.15 * static_cast<double>(d);
  MixtureComponent fwd{0.5, mu, 1.0, "fwd"};
  MixtureComponent bwd{0.5, -mu, 1.0, "bwd"};

  SamplerFixture fx{make_linear_schedule(opt.total_steps, 1e-4, opt.beta_end),
                    make_grid(opt.total_steps, opt.student_steps),
                    make_grid(opt.total_steps, opt.teacher_steps),
                    MixtureModel({fwd, bwd}),
                    nullptr,
                    nullptr,
                    LatentVideo(),
                    ReferenceBundle{},
                    GuidanceConfig{},
                    ConditionLabel::named("fwd"),
                    StudentPerturbation{opt.bias_amplitude, 77}};

  MotionParams motion;
  motion.drift = Eigen::VectorXd::Constant(opt.dim, 0.2);
  motion.ar = 1.0;
  motion.noise_scale = 0.05;
  RngStream ref_rng(opt.reference_seed, "reference");
  fx.reference =
      sample_reference(fx.mixture, motion, opt.frames, opt.dim, ref_rng);

  int t_alpha = default_t_alpha(fx.teacher_grid, opt.total_steps);
  AnalyticTeacher bundle_teacher(fx.mixture, fx.schedule);
  fx.bundle = build_reference_bundle(bundle_teacher, fx.reference,
                                     ConditionLabel::named("fwd"),
                                     fx.teacher_grid, t_alpha, 0.5,
                                     opt.feature_mode);

  fx.config.omega_student = 1.0;
  fx.config.omega_teacher = 1.0;
  fx.config.eta = 5.0;
  fx.config.lambda = 0.3;
  fx.config.tau = 0.2;
  fx.config.k = 0.05;
  fx.config.delta1 = 0.01;
  fx.config.delta2 = 0.002;
  fx.config.window = 2;
  fx.config.n_max = 3;
  fx.config.t_alpha = t_alpha;
  fx.config.inner_start_fraction = 0.5;
  fx.config.feature_mode = opt.feature_mode;

  fx.reset_models();
  return fx;
}

}  // namespace echo::test
