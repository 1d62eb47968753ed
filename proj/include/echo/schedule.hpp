#pragma once

#include <vector>

namespace echo {

// Discrete diffusion noise schedule. beta[i] is the per-step variance of
// diffusion step i+1 (t runs over 1..total_steps); alpha_bar[t] is the
// cumulative product of (1 - beta) up to t, with alpha_bar[0] = 1.
struct NoiseSchedule {
  int total_steps = 0;
  std::vector<double> beta;       // size total_steps
  std::vector<double> alpha_bar;  // size total_steps + 1, alpha_bar[0] = 1
};

// Linearly interpolated betas over T steps, alpha_bar by cumulative product.
NoiseSchedule make_linear_schedule(int total_steps, double beta_start,
                                   double beta_end);

double alpha_bar_at(const NoiseSchedule& schedule, int t);

// Uniform sampling grid: steps = [T, T - stride, ..., stride]. The final
// update (stride -> 0) is handled by the sampler.
struct TimestepGrid {
  std::vector<int> steps;
  int stride = 0;

  bool contains(int t) const;
};

// Requires steps to divide total_steps exactly; rejects otherwise.
TimestepGrid make_grid(int total_steps, int steps);

}  // namespace echo
