#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echo/echo_sampler.hpp"
#include "echo/serialize.hpp"

namespace echo {

struct ScheduleSpec {
  int total_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct GridSpec {
  int student_steps = 0;
  int teacher_steps = 0;
};

// Component mean builders keep config files compact: a constant frame, a
// linearly drifting ramp, or explicit rows.
struct MeanSpec {
  enum class Kind { kConstant, kDriftRamp, kExplicit } kind = Kind::kConstant;
  std::vector<double> frame;           // constant: repeated every frame
  std::vector<double> start, step;     // drift_ramp: row_i = start + i * step
  std::vector<std::vector<double>> rows;  // explicit
};

struct ComponentSpec {
  double weight = 0.0;
  double variance = 1.0;
  std::string label;
  MeanSpec mean;
};

struct ReferenceSpec {
  int frames = 0;
  int dim = 0;
  std::vector<double> drift;
  double ar = 1.0;
  double noise_scale = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> condition;  // label for inversion; empty = unconditional
  std::optional<int> t_alpha;            // absent: nearest fine step to 0.4 T
  double keep_fraction = 0.5;
};

struct StudentSpec {
  double bias_amplitude = 0.0;
  std::uint64_t bias_seed = 0;
};

struct ExperimentConfig {
  ScheduleSpec schedule;
  GridSpec grids;
  std::vector<ComponentSpec> components;
  ReferenceSpec reference;
  StudentSpec student;
  GuidanceConfig guidance;
  std::optional<std::string> condition;  // generation condition
  std::vector<std::uint64_t> seeds;
  std::vector<RunKind> kinds;
  bool deterministic = false;
  std::string out_dir = "runs/out";
};

ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::filesystem::path& file);

// Cross-field checks against every module's preconditions; throws ConfigError
// with a field path on the first violation.
void validate_config(const ExperimentConfig& config);

// Mean spec expanded to a frames x dim matrix.
LatentVideo build_mean(const MeanSpec& spec, int frames, int dim,
                       const std::string& path);

// Teacher-grid step nearest to 0.4 * T (ties toward the smaller step).
int default_t_alpha(const TimestepGrid& fine_grid, int total_steps);

}  // namespace echo
