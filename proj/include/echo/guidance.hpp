#pragma once

#include <string>
#include <vector>

#include "echo/latent.hpp"
#include "echo/motion.hpp"
#include "echo/rng.hpp"
#include "echo/schedule.hpp"
#include "echo/toyworld.hpp"

namespace echo {

// All scalar knobs of the adaptive sampler.
struct GuidanceConfig {
  double omega_student = 0.0;  // CFG scale of the student
  double omega_teacher = 0.0;  // CFG scale of the teacher
  double eta = 0.0;            // motion-guidance strength
  double lambda = 0.3;         // teacher-guidance strength, in [0, 1]
  double tau = 0.25;           // guidance gate: active while t > tau * T
  double k = 0.01;             // hybrid-noise blend factor, in [0, 1]
  double delta1 = 0.0;         // activation threshold (motion-loss units)
  double delta2 = 0.0;         // truncation threshold (motion-loss units)
  int window = 3;              // moving-window size W
  int n_max = 10;              // max inner teacher iterations
  int t_alpha = 0;             // reference feature timestep
  double inner_start_fraction = 0.5;  // locates t_s inside the interval
  FeatureMode feature_mode = FeatureMode::kPredictedClean;
  GradientMode gradient_mode = GradientMode::kAnalytic;

  // Throws on hard violations; returns soft warnings (delta2 > delta1).
  std::vector<std::string> validate() const;
};

// Classifier-free guidance: (1 + omega) * eps(z, c, t) - omega * eps(z, null, t).
// Exactly two model evaluations.
LatentVideo cfg_epsilon(const DenoiserModel& model, const LatentVideo& z,
                        const ConditionLabel& c, int t, double omega);

// Same combination, also handing back the conditional prediction so callers
// can reuse it (the model is deterministic).
struct CfgResult {
  LatentVideo eps_tilde;
  LatentVideo eps_cond;
};
CfgResult cfg_epsilon_full(const DenoiserModel& model, const LatentVideo& z,
                           const ConditionLabel& c, int t, double omega);

// Energy guidance on the predicted noise: eps_tilde - eta * motion_grad.
LatentVideo guided_epsilon(const LatentVideo& eps_tilde,
                           const LatentVideo& motion_grad, double eta);

// z_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps with fresh noise; t = 0 returns x0
// without consuming a draw.
LatentVideo renoise(const LatentVideo& x0, int t, const NoiseSchedule& schedule,
                    GaussianSource& noise);

// Convex endpoint blend: (1 - lambda) * x0_student + lambda * x0_teacher.
LatentVideo interpolate_x0(const LatentVideo& x0_student,
                           const LatentVideo& x0_teacher, double lambda);

}  // namespace echo
