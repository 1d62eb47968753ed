#pragma once

#include <cstdint>
#include <optional>

#include "echo/echo_sampler.hpp"
#include "echo/latent.hpp"
#include "echo/motion.hpp"

namespace echo {

// Per-frame displacement vectors: row i is frame_{i+1} - frame_i.
Eigen::MatrixXd motion_trajectory(const LatentVideo& video);

// Mean cosine similarity between corresponding displacement vectors. Pairs
// where either displacement is zero are skipped; absent when all are skipped.
std::optional<double> motion_fidelity_toy(const LatentVideo& generated,
                                          const LatentVideo& reference);

// Mean cosine similarity between consecutive frame latents. Absent when any
// frame is all-zero.
std::optional<double> temporal_consistency_toy(const LatentVideo& video);

// Masked attention discrepancy of a clean latent against the reference map;
// the motion loss evaluated directly at the sampler's output.
double final_motion_loss(const LatentVideo& video,
                         const ReferenceBundle& bundle);

struct NfeReport {
  std::int64_t student_nfe = 0;
  std::int64_t teacher_nfe = 0;
  std::int64_t gradient_evals = 0;
  int activated_steps = 0;
  int truncations_threshold = 0;
  int truncations_nmax = 0;
  int truncations_none = 0;  // teacher-guided steps that ran the full interval
};

// Fold over the trace records; exact sums.
NfeReport nfe_report(const SamplerTrace& trace);

}  // namespace echo
