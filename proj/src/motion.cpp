#include "echo/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "echo/inversion.hpp"

namespace echo {

namespace {

// dL/dS for A = row_softmax(S) given dL/dA.
Eigen::MatrixXd softmax_backward(const AttentionMap& a,
                                 const Eigen::MatrixXd& da) {
  Eigen::MatrixXd ds(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double dot = da.row(i).dot(a.row(i));
    ds.row(i) = (a.row(i).array() * (da.row(i).array() - dot)).matrix();
  }
  return ds;
}

// Loss and gradient with respect to the feature latent.
struct FeatureGrad {
  double loss;
  LatentVideo d_feature;
};

double masked_loss(const AttentionMap& a_ref, const TemporalMask& mask,
                   const AttentionMap& a) {
  return mask.cwiseProduct(a_ref - a).squaredNorm();
}

FeatureGrad loss_and_feature_grad(const LatentVideo& feature,
                                  const ReferenceBundle& bundle) {
  AttentionMap a = temporal_attention(feature);
  FeatureGrad fg;
  fg.loss = masked_loss(bundle.a_ref, bundle.mask, a);
  Eigen::MatrixXd da = 2.0 * bundle.mask.cwiseProduct(a - bundle.a_ref);
  Eigen::MatrixXd ds = softmax_backward(a, da);
  double scale = 1.0 / std::sqrt(static_cast<double>(feature.cols()));
  fg.d_feature = scale * (ds + ds.transpose()) * feature;
  return fg;
}

LatentVideo feature_latent(const LatentVideo& z, const LatentVideo& eps_cond,
                           const ReferenceBundle& bundle,
                           const NoiseSchedule& schedule, int t) {
  if (bundle.feature_mode == FeatureMode::kNoisyLatent) return z;
  return one_step_x0(z, eps_cond, t, schedule);
}

}  // namespace

AttentionMap temporal_attention(const LatentVideo& z) {
  if (z.rows() < 1 || z.cols() < 1)
    throw std::invalid_argument("temporal_attention: empty latent");
  Eigen::MatrixXd s =
      z * z.transpose() / std::sqrt(static_cast<double>(z.cols()));
  AttentionMap a(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double m = s.row(i).maxCoeff();
    Eigen::ArrayXd e = (s.row(i).array() - m).exp();
    a.row(i) = (e / e.sum()).matrix();
  }
  return a;
}

TemporalMask derive_mask(const AttentionMap& a_ref, double keep_fraction) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw std::invalid_argument("derive_mask: keep_fraction = " +
                                std::to_string(keep_fraction) +
                                " outside (0, 1]");
  const Eigen::Index f = a_ref.cols();  // entries per row
  const auto keep = static_cast<Eigen::Index>(
      std::ceil(keep_fraction * static_cast<double>(f)));

  TemporalMask mask = TemporalMask::Zero(a_ref.rows(), a_ref.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(f));
  for (Eigen::Index i = 0; i < a_ref.rows(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return a_ref(i, a) > a_ref(i, b);
                     });
    for (Eigen::Index j = 0; j < keep; ++j)
      mask(i, order[static_cast<std::size_t>(j)]) = 1.0;
  }
  return mask;
}

ReferenceBundle build_reference_bundle(const DenoiserModel& teacher,
                                       const LatentVideo& reference,
                                       const ConditionLabel& c,
                                       const TimestepGrid& fine_grid,
                                       int t_alpha, double keep_fraction,
                                       FeatureMode mode) {
  InversionResult inv = ddim_invert(teacher, reference, c, fine_grid, t_alpha);

  ReferenceBundle bundle;
  bundle.z_ref_T = inv.z_T;
  bundle.z_ref_talpha = inv.z_at;
  bundle.t_alpha = t_alpha;
  bundle.feature_mode = mode;

  LatentVideo feature = inv.z_at;
  if (mode == FeatureMode::kPredictedClean) {
    LatentVideo eps = teacher.predict_epsilon(inv.z_at, c, t_alpha);
    feature = one_step_x0(inv.z_at, eps, t_alpha, teacher.schedule());
  }
  bundle.a_ref = temporal_attention(feature);
  bundle.mask = derive_mask(bundle.a_ref, keep_fraction);
  return bundle;
}

double motion_loss(const LatentVideo& z, const ReferenceBundle& bundle,
                   const DenoiserModel& model, const ConditionLabel& c, int t) {
  if (bundle.feature_mode == FeatureMode::kNoisyLatent)
    return masked_loss(bundle.a_ref, bundle.mask, temporal_attention(z));
  LatentVideo eps = model.predict_epsilon(z, c, t);
  return motion_loss_from_eps(z, eps, bundle, model.schedule(), t);
}

double motion_loss_from_eps(const LatentVideo& z, const LatentVideo& eps_cond,
                            const ReferenceBundle& bundle,
                            const NoiseSchedule& schedule, int t) {
  LatentVideo feature = feature_latent(z, eps_cond, bundle, schedule, t);
  return masked_loss(bundle.a_ref, bundle.mask, temporal_attention(feature));
}

LatentVideo motion_loss_grad(const LatentVideo& z, const ReferenceBundle& bundle,
                             const DenoiserModel& model, const ConditionLabel& c,
                             int t, GradientMode mode) {
  if (mode == GradientMode::kFiniteDifference) {
    constexpr double h = 1e-5;
    LatentVideo grad(z.rows(), z.cols());
    LatentVideo probe = z;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (Eigen::Index cidx = 0; cidx < z.cols(); ++cidx) {
        probe(r, cidx) = z(r, cidx) + h;
        double up = motion_loss(probe, bundle, model, c, t);
        probe(r, cidx) = z(r, cidx) - h;
        double down = motion_loss(probe, bundle, model, c, t);
        probe(r, cidx) = z(r, cidx);
        grad(r, cidx) = (up - down) / (2.0 * h);
      }
    }
    return grad;
  }
  if (bundle.feature_mode == FeatureMode::kNoisyLatent)
    return loss_and_feature_grad(z, bundle).d_feature;
  LatentVideo eps = model.predict_epsilon(z, c, t);
  return motion_loss_grad_from_eps(z, eps, bundle, model, c, t);
}

LatentVideo motion_loss_grad_from_eps(const LatentVideo& z,
                                      const LatentVideo& eps_cond,
                                      const ReferenceBundle& bundle,
                                      const DenoiserModel& model,
                                      const ConditionLabel& c, int t) {
  const NoiseSchedule& schedule = model.schedule();
  LatentVideo feature = feature_latent(z, eps_cond, bundle, schedule, t);
  FeatureGrad fg = loss_and_feature_grad(feature, bundle);
  if (bundle.feature_mode == FeatureMode::kNoisyLatent) return fg.d_feature;

  // Chain through x0 = (z - sqrt(1 - ab) eps(z)) / sqrt(ab).
  double ab = alpha_bar_at(schedule, t);
  LatentVideo jtu = model.epsilon_vjp(z, c, t, fg.d_feature);
  return (fg.d_feature - std::sqrt(1.0 - ab) * jtu) / std::sqrt(ab);
}

}  // namespace echo
