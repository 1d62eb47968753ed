#pragma once

#include "echo/latent.hpp"
#include "echo/schedule.hpp"
#include "echo/toyworld.hpp"

namespace echo {

// Which latent the temporal attention is computed from: the one-step
// predicted clean latent (default) or the raw noisy latent.
enum class FeatureMode { kPredictedClean, kNoisyLatent };

// Analytic chain rule is the fast path; finite differences is the oracle
// fallback, selectable from the experiment config.
enum class GradientMode { kAnalytic, kFiniteDifference };

// Row-softmax of the frame Gram matrix z z^T / sqrt(dim).
AttentionMap temporal_attention(const LatentVideo& z);

// Per row keeps the ceil(p * frames) largest entries, ties broken by lower
// column index. Rejects p outside (0, 1].
TemporalMask derive_mask(const AttentionMap& a_ref, double keep_fraction);

// Everything the guidance needs from the reference video, frozen at bundle
// construction: the fully inverted latent, the intermediate latent at
// t_alpha, and the attention map / mask of the reference feature.
struct ReferenceBundle {
  LatentVideo z_ref_T;
  LatentVideo z_ref_talpha;
  AttentionMap a_ref;
  TemporalMask mask;
  int t_alpha = 0;
  FeatureMode feature_mode = FeatureMode::kPredictedClean;
};

// Inverts the reference on the fine grid, records the latent at t_alpha and
// derives the reference attention map and mask from its feature latent.
ReferenceBundle build_reference_bundle(const DenoiserModel& teacher,
                                       const LatentVideo& reference,
                                       const ConditionLabel& c,
                                       const TimestepGrid& fine_grid,
                                       int t_alpha, double keep_fraction,
                                       FeatureMode mode);

// Masked squared discrepancy between the attention map of z's feature latent
// and the reference attention map.
double motion_loss(const LatentVideo& z, const ReferenceBundle& bundle,
                   const DenoiserModel& model, const ConditionLabel& c, int t);

// Same, reusing a conditional noise prediction already computed at (z, c, t);
// avoids a second model evaluation inside the samplers.
double motion_loss_from_eps(const LatentVideo& z, const LatentVideo& eps_cond,
                            const ReferenceBundle& bundle,
                            const NoiseSchedule& schedule, int t);

// Gradient of motion_loss with respect to z.
LatentVideo motion_loss_grad(const LatentVideo& z, const ReferenceBundle& bundle,
                             const DenoiserModel& model, const ConditionLabel& c,
                             int t, GradientMode mode = GradientMode::kAnalytic);

// Analytic gradient reusing a precomputed conditional noise prediction.
LatentVideo motion_loss_grad_from_eps(const LatentVideo& z,
                                      const LatentVideo& eps_cond,
                                      const ReferenceBundle& bundle,
                                      const DenoiserModel& model,
                                      const ConditionLabel& c, int t);

}  // namespace echo
