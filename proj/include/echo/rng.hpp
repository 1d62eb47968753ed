#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "echo/latent.hpp"

namespace echo {

// Mixes a salt into a seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// Named, seeded noise stream. Each stream seeds an independent mt19937_64
// from the master seed and a hash of the stream name, so consuming draws from
// one stream never perturbs another stream with the same master seed.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  // Uniform in [0, 1).
  double uniform();

  // Standard normal via Box-Muller. Always consumes exactly two uniforms and
  // keeps no spare, so the draw count per scalar is fixed.
  double normal();

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 gen_;
};

// A noise source that draws standard normals from a stream, or yields zeros
// in deterministic mode. Zero draws consume nothing from the stream.
struct GaussianSource {
  RngStream* stream = nullptr;
  bool deterministic = false;

  Eigen::MatrixXd draw(Eigen::Index rows, Eigen::Index cols);
};

}  // namespace echo
