#include "echo/guidance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace echo {

namespace {
void require_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw std::invalid_argument(std::string("GuidanceConfig: ") + name +
                                " = " + std::to_string(v) +
                                " outside [0, 1]");
}
}  // namespace

std::vector<std::string> GuidanceConfig::validate() const {
  require_unit(lambda, "lambda");
  require_unit(tau, "tau");
  require_unit(k, "k");
  if (!(eta >= 0.0))
    throw std::invalid_argument("GuidanceConfig: eta must be >= 0");
  if (window < 1)
    throw std::invalid_argument("GuidanceConfig: window must be >= 1");
  if (n_max < 0)
    throw std::invalid_argument("GuidanceConfig: n_max must be >= 0");
  if (!(inner_start_fraction > 0.0) || inner_start_fraction > 1.0)
    throw std::invalid_argument(
        "GuidanceConfig: inner_start_fraction outside (0, 1]");

  std::vector<std::string> warnings;
  if (delta2 > delta1)
    warnings.push_back("GuidanceConfig: delta2 > delta1; truncation fires "
                       "before activation would");
  return warnings;
}

LatentVideo cfg_epsilon(const DenoiserModel& model, const LatentVideo& z,
                        const ConditionLabel& c, int t, double omega) {
  return cfg_epsilon_full(model, z, c, t, omega).eps_tilde;
}

CfgResult cfg_epsilon_full(const DenoiserModel& model, const LatentVideo& z,
                           const ConditionLabel& c, int t, double omega) {
  CfgResult out;
  out.eps_cond = model.predict_epsilon(z, c, t);
  LatentVideo eps_uncond =
      model.predict_epsilon(z, ConditionLabel::unconditional(), t);
  out.eps_tilde = (1.0 + omega) * out.eps_cond - omega * eps_uncond;
  return out;
}

LatentVideo guided_epsilon(const LatentVideo& eps_tilde,
                           const LatentVideo& motion_grad, double eta) {
  if (eps_tilde.rows() != motion_grad.rows() ||
      eps_tilde.cols() != motion_grad.cols())
    throw std::invalid_argument("guided_epsilon: shape mismatch");
  return eps_tilde - eta * motion_grad;
}

LatentVideo renoise(const LatentVideo& x0, int t, const NoiseSchedule& schedule,
                    GaussianSource& noise) {
  double ab = alpha_bar_at(schedule, t);
  if (t == 0) return x0;
  LatentVideo eps = noise.draw(x0.rows(), x0.cols());
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

LatentVideo interpolate_x0(const LatentVideo& x0_student,
                           const LatentVideo& x0_teacher, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("interpolate_x0: lambda outside [0, 1]");
  if (x0_student.rows() != x0_teacher.rows() ||
      x0_student.cols() != x0_teacher.cols())
    throw std::invalid_argument("interpolate_x0: shape mismatch");
  return (1.0 - lambda) * x0_student + lambda * x0_teacher;
}

}  // namespace echo
