#pragma once

// Straight-line re-implementation of the adaptive sampler used as a
// cross-check oracle. All control flow (gating, window averaging, activation,
// inner-loop truncation, endpoint selection) is written out inline from
// scratch; only the stateless algebra helpers are shared with the library.

#include <cstdint>
#include <vector>

#include "echo/echo_sampler.hpp"

namespace echo::test {

struct MirrorStep {
  int t = 0;
  double motion_loss = 0.0;
  bool has_window_avg = false;
  double window_avg = 0.0;
  Stage stage = Stage::kNoGuidance;
  int inner_steps = 0;
  Truncation truncated_by = Truncation::kNone;
  std::vector<double> inner_losses;
};

struct MirrorResult {
  LatentVideo final_latent;
  std::vector<MirrorStep> steps;
};

MirrorResult mirror_run(const GuidanceConfig& config, const RunInputs& inputs,
                        std::uint64_t seed, bool deterministic);

}  // namespace echo::test
