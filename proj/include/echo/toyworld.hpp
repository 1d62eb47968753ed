#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echo/latent.hpp"
#include "echo/rng.hpp"
#include "echo/schedule.hpp"

namespace echo {

// Condition symbol: a named class selecting a subset of mixture components,
// or the unconditional symbol which selects all of them.
struct ConditionLabel {
  std::optional<std::string> name;

  static ConditionLabel unconditional() { return {}; }
  static ConditionLabel named(std::string n) {
    return ConditionLabel{std::move(n)};
  }
  bool is_unconditional() const { return !name.has_value(); }
  bool operator==(const ConditionLabel&) const = default;
};

struct MixtureComponent {
  double weight = 0.0;
  LatentVideo mean;  // frames x dim
  double variance = 1.0;  // isotropic
  std::string label;
};

// Analytic data distribution over latent videos: a Gaussian mixture with
// isotropic per-component covariance. Under the forward process at time t,
// component k stays Gaussian with mean sqrt(ab)*mu_k and variance
// ab*var_k + (1 - ab), ab = alpha_bar[t], so scores are closed form.
class MixtureModel {
 public:
  explicit MixtureModel(std::vector<MixtureComponent> components);

  Eigen::Index frames() const { return frames_; }
  Eigen::Index dim() const { return dim_; }
  const std::vector<MixtureComponent>& components() const {
    return components_;
  }

  // Component indices selected by a condition; throws on unknown labels.
  const std::vector<int>& selected(const ConditionLabel& c) const;

  // log p_t(z | c) of the noised mixture.
  double log_density(const NoiseSchedule& schedule, const LatentVideo& z,
                     const ConditionLabel& c, int t) const;

  // Posterior responsibilities over the selected subset, computed in the log
  // domain. Order matches selected(c).
  Eigen::VectorXd responsibilities(const NoiseSchedule& schedule,
                                   const LatentVideo& z,
                                   const ConditionLabel& c, int t) const;

 private:
  std::vector<MixtureComponent> components_;
  std::map<std::string, std::vector<int>> by_label_;
  std::vector<int> all_;
  Eigen::Index frames_ = 0;
  Eigen::Index dim_ = 0;
};

// Bayes-optimal noise prediction for the noised mixture:
//   eps*(z, c, t) = -sqrt(1 - alpha_bar[t]) * grad_z log p_t(z | c).
// Rejects t = 0 (nothing to predict) and t > T.
LatentVideo exact_epsilon(const MixtureModel& mixture,
                          const NoiseSchedule& schedule, const LatentVideo& z,
                          const ConditionLabel& c, int t);

// (d eps / d z)^T u at (z, c, t); the Jacobian is symmetric here, built from
// the Hessian of log p_t. Used by the analytic motion-gradient chain rule.
LatentVideo exact_epsilon_vjp(const MixtureModel& mixture,
                              const NoiseSchedule& schedule,
                              const LatentVideo& z, const ConditionLabel& c,
                              int t, const LatentVideo& u);

// Frozen per-timestep distillation error of the student. amplitude = 0
// reproduces the teacher exactly on shared timesteps.
struct StudentPerturbation {
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

// Deterministic standard-normal field attached to timestep t; regenerating
// with the same (seed, t) yields the identical field.
LatentVideo student_bias_field(const StudentPerturbation& p, int t,
                               Eigen::Index frames, Eigen::Index dim);

// Distilled predictor: the exact predictor restricted to the coarse grid plus
// the frozen bias field. Rejects t off the grid.
LatentVideo student_epsilon(const MixtureModel& mixture,
                            const NoiseSchedule& schedule,
                            const TimestepGrid& grid,
                            const StudentPerturbation& p, const LatentVideo& z,
                            const ConditionLabel& c, int t);

// One-step endpoint prediction: x0 = (z - sqrt(1 - ab)*eps) / sqrt(ab).
LatentVideo one_step_x0(const LatentVideo& z, const LatentVideo& eps, int t,
                        const NoiseSchedule& schedule);

// Noise-prediction interface shared by the teacher and the student. Instances
// are immutable apart from the evaluation counter; the counter is atomic so
// concurrent runs on separate instances stay race-free.
class DenoiserModel {
 public:
  virtual ~DenoiserModel() = default;

  virtual LatentVideo predict_epsilon(const LatentVideo& z,
                                      const ConditionLabel& c, int t) const = 0;
  virtual LatentVideo epsilon_vjp(const LatentVideo& z, const ConditionLabel& c,
                                  int t, const LatentVideo& u) const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  std::int64_t evals() const { return evals_.load(std::memory_order_relaxed); }
  void reset_evals() { evals_.store(0, std::memory_order_relaxed); }

 protected:
  void count_eval() const { evals_.fetch_add(1, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::int64_t> evals_{0};
};

class AnalyticTeacher : public DenoiserModel {
 public:
  AnalyticTeacher(MixtureModel mixture, NoiseSchedule schedule);

  LatentVideo predict_epsilon(const LatentVideo& z, const ConditionLabel& c,
                              int t) const override;
  LatentVideo epsilon_vjp(const LatentVideo& z, const ConditionLabel& c, int t,
                          const LatentVideo& u) const override;
  const NoiseSchedule& schedule() const override { return schedule_; }
  const MixtureModel& mixture() const { return mixture_; }

 private:
  MixtureModel mixture_;
  NoiseSchedule schedule_;
};

class DistilledStudent : public DenoiserModel {
 public:
  DistilledStudent(MixtureModel mixture, NoiseSchedule schedule,
                   TimestepGrid grid, StudentPerturbation perturbation);

  LatentVideo predict_epsilon(const LatentVideo& z, const ConditionLabel& c,
                              int t) const override;
  LatentVideo epsilon_vjp(const LatentVideo& z, const ConditionLabel& c, int t,
                          const LatentVideo& u) const override;
  const NoiseSchedule& schedule() const override { return schedule_; }
  const TimestepGrid& grid() const { return grid_; }

 private:
  MixtureModel mixture_;
  NoiseSchedule schedule_;
  TimestepGrid grid_;
  StudentPerturbation perturbation_;
};

// Synthetic reference motion: frame_{i+1} = ar * frame_i + drift + noise.
struct MotionParams {
  Eigen::VectorXd drift;      // dim
  double ar = 1.0;
  double noise_scale = 0.0;
};

// Draws frame 0 from the mixture (component by weight, then isotropic noise)
// and unrolls the AR recursion. Deterministic given the stream state.
LatentVideo sample_reference(const MixtureModel& mixture,
                             const MotionParams& motion, Eigen::Index frames,
                             Eigen::Index dim, RngStream& rng);

}  // namespace echo
