#pragma once

#include "echo/latent.hpp"
#include "echo/rng.hpp"
#include "echo/schedule.hpp"
#include "echo/toyworld.hpp"

namespace echo {

struct InversionResult {
  LatentVideo z_T;   // fully inverted latent
  LatentVideo z_at;  // latent recorded at record_at
};

// Deterministic DDIM inversion of a clean latent up the given grid, using the
// conditional prediction (no CFG). record_at must be a grid step. The first
// hop leaves t = 0, where there is no noise to predict, so it uses eps = 0.
InversionResult ddim_invert(const DenoiserModel& model, const LatentVideo& z0,
                            const ConditionLabel& c, const TimestepGrid& grid,
                            int record_at);

// Deterministic DDIM sampling down the grid (no CFG, no renoising); the final
// step emits the endpoint prediction directly.
LatentVideo ddim_sample(const DenoiserModel& model, const LatentVideo& z_T,
                        const ConditionLabel& c, const TimestepGrid& grid);

// Hybrid noise initialization: sqrt(k) * z_ref_T + sqrt(1 - k) * eps.
LatentVideo blend_init(const LatentVideo& z_ref_T, double k,
                       GaussianSource& noise);

}  // namespace echo
