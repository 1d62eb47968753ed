#include "echo/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace echo {

InversionResult ddim_invert(const DenoiserModel& model, const LatentVideo& z0,
                            const ConditionLabel& c, const TimestepGrid& grid,
                            int record_at) {
  if (std::find(grid.steps.begin(), grid.steps.end(), record_at) ==
      grid.steps.end())
    throw std::invalid_argument("ddim_invert: record_at = " +
                                std::to_string(record_at) +
                                " is not a grid step");

  const NoiseSchedule& schedule = model.schedule();
  InversionResult out;
  LatentVideo z = z0;
  int t = 0;

  // Ascend the grid: t' = stride, 2*stride, ..., T.
  for (auto it = grid.steps.rbegin(); it != grid.steps.rend(); ++it) {
    int t_next = *it;
    LatentVideo x0_hat, eps;
    if (t == 0) {
      x0_hat = z;
      eps = LatentVideo::Zero(z.rows(), z.cols());
    } else {
      eps = model.predict_epsilon(z, c, t);
      x0_hat = one_step_x0(z, eps, t, schedule);
    }
    double ab = alpha_bar_at(schedule, t_next);
    z = std::sqrt(ab) * x0_hat + std::sqrt(1.0 - ab) * eps;
    t = t_next;
    if (t == record_at) out.z_at = z;
  }
  out.z_T = z;
  return out;
}

LatentVideo ddim_sample(const DenoiserModel& model, const LatentVideo& z_T,
                        const ConditionLabel& c, const TimestepGrid& grid) {
  const NoiseSchedule& schedule = model.schedule();
  LatentVideo z = z_T;
  for (int t : grid.steps) {
    LatentVideo eps = model.predict_epsilon(z, c, t);
    LatentVideo x0_hat = one_step_x0(z, eps, t, schedule);
    int t_next = t - grid.stride;
    if (t_next == 0) {
      z = x0_hat;
    } else {
      double ab = alpha_bar_at(schedule, t_next);
      z = std::sqrt(ab) * x0_hat + std::sqrt(1.0 - ab) * eps;
    }
  }
  return z;
}

LatentVideo blend_init(const LatentVideo& z_ref_T, double k,
                       GaussianSource& noise) {
  if (!(k >= 0.0 && k <= 1.0))
    throw std::invalid_argument("blend_init: k = " + std::to_string(k) +
                                " outside [0, 1]");
  LatentVideo eps = noise.draw(z_ref_T.rows(), z_ref_T.cols());
  return std::sqrt(k) * z_ref_T + std::sqrt(1.0 - k) * eps;
}

}  // namespace echo
