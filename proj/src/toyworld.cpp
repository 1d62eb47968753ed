#include "echo/toyworld.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace echo {

namespace {

constexpr double kWeightTol = 1e-12;

void check_t_positive(const NoiseSchedule& schedule, int t, const char* who) {
  if (t < 1 || t > schedule.total_steps)
    throw std::invalid_argument(std::string(who) + ": t = " +
                                std::to_string(t) + " outside [1, " +
                                std::to_string(schedule.total_steps) + "]");
}

// Per-component noised parameters at time t.
struct NoisedComponent {
  double mean_scale;  // sqrt(alpha_bar)
  double var;         // alpha_bar * component variance + (1 - alpha_bar)
};

NoisedComponent noised(const NoiseSchedule& schedule,
                       const MixtureComponent& comp, int t) {
  double ab = alpha_bar_at(schedule, t);
  return {std::sqrt(ab), ab * comp.variance + (1.0 - ab)};
}

}  // namespace

MixtureModel::MixtureModel(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw std::invalid_argument("MixtureModel: no components");
  frames_ = components_[0].mean.rows();
  dim_ = components_[0].mean.cols();
  if (frames_ < 1 || dim_ < 1)
    throw std::invalid_argument("MixtureModel: component means must be non-empty");

  double total = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    if (c.mean.rows() != frames_ || c.mean.cols() != dim_)
      throw std::invalid_argument("MixtureModel: component " +
                                  std::to_string(k) + " has mismatched shape");
    if (!(c.weight > 0.0))
      throw std::invalid_argument("MixtureModel: component " +
                                  std::to_string(k) + " weight must be > 0");
    if (!(c.variance > 0.0))
      throw std::invalid_argument("MixtureModel: component " +
                                  std::to_string(k) + " variance must be > 0");
    if (!all_finite(c.mean))
      throw std::invalid_argument("MixtureModel: component " +
                                  std::to_string(k) + " mean not finite");
    total += c.weight;
    by_label_[c.label].push_back(static_cast<int>(k));
    all_.push_back(static_cast<int>(k));
  }
  if (std::abs(total - 1.0) > kWeightTol)
    throw std::invalid_argument("MixtureModel: weights sum to " +
                                std::to_string(total) + ", expected 1");
}

const std::vector<int>& MixtureModel::selected(const ConditionLabel& c) const {
  if (c.is_unconditional()) return all_;
  auto it = by_label_.find(*c.name);
  if (it == by_label_.end())
    throw std::invalid_argument("MixtureModel: unknown condition label '" +
                                *c.name + "'");
  return it->second;
}

double MixtureModel::log_density(const NoiseSchedule& schedule,
                                 const LatentVideo& z, const ConditionLabel& c,
                                 int t) const {
  check_t_positive(schedule, t, "MixtureModel::log_density");
  const auto& subset = selected(c);
  const double n = static_cast<double>(frames_ * dim_);

  double subset_weight = 0.0;
  double max_lw = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& comp = components_[static_cast<std::size_t>(subset[i])];
    auto nc = noised(schedule, comp, t);
    double q = (z - nc.mean_scale * comp.mean).squaredNorm();
    lw[i] = std::log(comp.weight) -
            0.5 * n * std::log(2.0 * std::numbers::pi * nc.var) -
            0.5 * q / nc.var;
    max_lw = std::max(max_lw, lw[i]);
    subset_weight += comp.weight;
  }
  double sum = 0.0;
  for (double v : lw) sum += std::exp(v - max_lw);
  return max_lw + std::log(sum) - std::log(subset_weight);
}

Eigen::VectorXd MixtureModel::responsibilities(const NoiseSchedule& schedule,
                                               const LatentVideo& z,
                                               const ConditionLabel& c,
                                               int t) const {
  check_t_positive(schedule, t, "MixtureModel::responsibilities");
  const auto& subset = selected(c);
  const double n = static_cast<double>(frames_ * dim_);

  Eigen::VectorXd lw(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& comp = components_[static_cast<std::size_t>(subset[i])];
    auto nc = noised(schedule, comp, t);
    double q = (z - nc.mean_scale * comp.mean).squaredNorm();
    lw[static_cast<Eigen::Index>(i)] =
        std::log(comp.weight) -
        0.5 * n * std::log(2.0 * std::numbers::pi * nc.var) -
        0.5 * q / nc.var;
  }
  double m = lw.maxCoeff();
  Eigen::VectorXd r = (lw.array() - m).exp();
  r /= r.sum();
  return r;
}

LatentVideo exact_epsilon(const MixtureModel& mixture,
                          const NoiseSchedule& schedule, const LatentVideo& z,
                          const ConditionLabel& c, int t) {
  if (t == 0)
    throw std::invalid_argument("exact_epsilon: t = 0 has no noise to predict");
  check_t_positive(schedule, t, "exact_epsilon");
  if (z.rows() != mixture.frames() || z.cols() != mixture.dim())
    throw std::invalid_argument("exact_epsilon: latent shape mismatch");

  const auto& subset = mixture.selected(c);
  Eigen::VectorXd r = mixture.responsibilities(schedule, z, c, t);

  // score = sum_k r_k (m_k - z) / s_k^2
  LatentVideo score = LatentVideo::Zero(z.rows(), z.cols());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& comp = mixture.components()[static_cast<std::size_t>(subset[i])];
    auto nc = noised(schedule, comp, t);
    score += (r[static_cast<Eigen::Index>(i)] / nc.var) *
             (nc.mean_scale * comp.mean - z);
  }
  double ab = alpha_bar_at(schedule, t);
  return -std::sqrt(1.0 - ab) * score;
}

LatentVideo exact_epsilon_vjp(const MixtureModel& mixture,
                              const NoiseSchedule& schedule,
                              const LatentVideo& z, const ConditionLabel& c,
                              int t, const LatentVideo& u) {
  check_t_positive(schedule, t, "exact_epsilon_vjp");
  const auto& subset = mixture.selected(c);
  Eigen::VectorXd r = mixture.responsibilities(schedule, z, c, t);

  // H(log p) u = sum_k r_k g_k <g_k, u> - g_bar <g_bar, u> - (sum_k r_k/s_k^2) u
  // with g_k = (m_k - z)/s_k^2 and g_bar the responsibility-weighted mean.
  LatentVideo g_bar = LatentVideo::Zero(z.rows(), z.cols());
  LatentVideo hu = LatentVideo::Zero(z.rows(), z.cols());
  double prec = 0.0;
  std::vector<LatentVideo> g(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& comp = mixture.components()[static_cast<std::size_t>(subset[i])];
    auto nc = noised(schedule, comp, t);
    g[i] = (nc.mean_scale * comp.mean - z) / nc.var;
    double ri = r[static_cast<Eigen::Index>(i)];
    g_bar += ri * g[i];
    prec += ri / nc.var;
  }
  for (std::size_t i = 0; i < subset.size(); ++i) {
    double ri = r[static_cast<Eigen::Index>(i)];
    hu += ri * g[i] * g[i].cwiseProduct(u).sum();
  }
  hu -= g_bar * g_bar.cwiseProduct(u).sum();
  hu -= prec * u;

  double ab = alpha_bar_at(schedule, t);
  return -std::sqrt(1.0 - ab) * hu;
}

LatentVideo student_bias_field(const StudentPerturbation& p, int t,
                               Eigen::Index frames, Eigen::Index dim) {
  RngStream stream(mix_seed(p.seed, static_cast<std::uint64_t>(t)),
                   "student-bias");
  return stream.normal_matrix(frames, dim);
}

LatentVideo student_epsilon(const MixtureModel& mixture,
                            const NoiseSchedule& schedule,
                            const TimestepGrid& grid,
                            const StudentPerturbation& p, const LatentVideo& z,
                            const ConditionLabel& c, int t) {
  if (!grid.contains(t))
    throw std::invalid_argument("student_epsilon: t = " + std::to_string(t) +
                                " is off the student grid");
  LatentVideo eps = exact_epsilon(mixture, schedule, z, c, t);
  if (p.amplitude != 0.0)
    eps += p.amplitude * student_bias_field(p, t, z.rows(), z.cols());
  return eps;
}

LatentVideo one_step_x0(const LatentVideo& z, const LatentVideo& eps, int t,
                        const NoiseSchedule& schedule) {
  if (z.rows() != eps.rows() || z.cols() != eps.cols())
    throw std::invalid_argument("one_step_x0: shape mismatch");
  double ab = alpha_bar_at(schedule, t);
  return (z - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
}

AnalyticTeacher::AnalyticTeacher(MixtureModel mixture, NoiseSchedule schedule)
    : mixture_(std::move(mixture)), schedule_(std::move(schedule)) {}

LatentVideo AnalyticTeacher::predict_epsilon(const LatentVideo& z,
                                             const ConditionLabel& c,
                                             int t) const {
  count_eval();
  return exact_epsilon(mixture_, schedule_, z, c, t);
}

LatentVideo AnalyticTeacher::epsilon_vjp(const LatentVideo& z,
                                         const ConditionLabel& c, int t,
                                         const LatentVideo& u) const {
  return exact_epsilon_vjp(mixture_, schedule_, z, c, t, u);
}

DistilledStudent::DistilledStudent(MixtureModel mixture, NoiseSchedule schedule,
                                   TimestepGrid grid,
                                   StudentPerturbation perturbation)
    : mixture_(std::move(mixture)),
      schedule_(std::move(schedule)),
      grid_(std::move(grid)),
      perturbation_(perturbation) {}

LatentVideo DistilledStudent::predict_epsilon(const LatentVideo& z,
                                              const ConditionLabel& c,
                                              int t) const {
  count_eval();
  return student_epsilon(mixture_, schedule_, grid_, perturbation_, z, c, t);
}

LatentVideo DistilledStudent::epsilon_vjp(const LatentVideo& z,
                                          const ConditionLabel& c, int t,
                                          const LatentVideo& u) const {
  if (!grid_.contains(t))
    throw std::invalid_argument("DistilledStudent::epsilon_vjp: t off grid");
  // The bias field does not depend on z, so the Jacobian is the exact one.
  return exact_epsilon_vjp(mixture_, schedule_, z, c, t, u);
}

LatentVideo sample_reference(const MixtureModel& mixture,
                             const MotionParams& motion, Eigen::Index frames,
                             Eigen::Index dim, RngStream& rng) {
  if (frames < 2)
    throw std::invalid_argument("sample_reference: need at least 2 frames");
  if (motion.drift.size() != dim)
    throw std::invalid_argument("sample_reference: drift dimension mismatch");
  if (mixture.dim() != dim)
    throw std::invalid_argument("sample_reference: mixture dim mismatch");

  // Component pick by weight, then frame 0 near that component's first frame.
  double u = rng.uniform();
  std::size_t pick = mixture.components().size() - 1;
  double acc = 0.0;
  for (std::size_t k = 0; k < mixture.components().size(); ++k) {
    acc += mixture.components()[k].weight;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  const auto& comp = mixture.components()[pick];
  LatentVideo video(frames, dim);
  video.row(0) = comp.mean.row(0) +
                 std::sqrt(comp.variance) * rng.normal_matrix(1, dim);
  for (Eigen::Index f = 1; f < frames; ++f) {
    video.row(f) = motion.ar * video.row(f - 1) + motion.drift.transpose();
    if (motion.noise_scale != 0.0)
      video.row(f) += motion.noise_scale * rng.normal_matrix(1, dim);
  }
  return video;
}

}  // namespace echo
