#include "echo/schedule.hpp"

#include <stdexcept>
#include <string>

namespace echo {

NoiseSchedule make_linear_schedule(int total_steps, double beta_start,
                                   double beta_end) {
  if (total_steps < 1)
    throw std::invalid_argument("make_linear_schedule: total_steps must be >= 1, got " +
                                std::to_string(total_steps));
  if (!(beta_start > 0.0) || !(beta_end < 1.0))
    throw std::invalid_argument("make_linear_schedule: betas must lie in (0, 1)");
  if (beta_start > beta_end)
    throw std::invalid_argument("make_linear_schedule: beta_start > beta_end");

  NoiseSchedule s;
  s.total_steps = total_steps;
  s.beta.resize(total_steps);
  s.alpha_bar.resize(total_steps + 1);
  s.alpha_bar[0] = 1.0;
  for (int i = 0; i < total_steps; ++i) {
    double frac = total_steps == 1 ? 0.0
                                   : static_cast<double>(i) / (total_steps - 1);
    s.beta[i] = beta_start + (beta_end - beta_start) * frac;
    s.alpha_bar[i + 1] = s.alpha_bar[i] * (1.0 - s.beta[i]);
  }
  return s;
}

double alpha_bar_at(const NoiseSchedule& schedule, int t) {
  if (t < 0 || t > schedule.total_steps)
    throw std::out_of_range("alpha_bar_at: t = " + std::to_string(t) +
                            " outside [0, " +
                            std::to_string(schedule.total_steps) + "]");
  return schedule.alpha_bar[static_cast<std::size_t>(t)];
}

bool TimestepGrid::contains(int t) const {
  if (stride <= 0 || steps.empty()) return false;
  return t >= stride && t <= steps.front() && t % stride == 0;
}

TimestepGrid make_grid(int total_steps, int steps) {
  if (total_steps < 1 || steps < 1)
    throw std::invalid_argument("make_grid: counts must be positive");
  if (total_steps % steps != 0)
    throw std::invalid_argument(
        "make_grid: steps = " + std::to_string(steps) +
        " does not divide total_steps = " + std::to_string(total_steps));

  TimestepGrid g;
  g.stride = total_steps / steps;
  g.steps.reserve(steps);
  for (int t = total_steps; t >= g.stride; t -= g.stride) g.steps.push_back(t);
  return g;
}

}  // namespace echo
