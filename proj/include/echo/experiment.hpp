#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "echo/config.hpp"
#include "echo/echo_sampler.hpp"
#include "echo/metrics.hpp"

namespace echo {

// Everything derived from a config that is shared across runs: schedule,
// grids, mixture, the synthesized reference video and its inverted bundle.
struct World {
  NoiseSchedule schedule;
  TimestepGrid student_grid;
  TimestepGrid teacher_grid;
  MixtureModel mixture;
  StudentPerturbation perturbation;
  ConditionLabel condition;
  ConditionLabel reference_condition;
  LatentVideo reference_video;
  ReferenceBundle bundle;
  GuidanceConfig guidance;  // t_alpha resolved
};

World build_world(const ExperimentConfig& config);

// Fresh model instances for one run (separate evaluation counters).
std::unique_ptr<AnalyticTeacher> make_teacher(const World& world);
std::unique_ptr<DistilledStudent> make_student(const World& world);

struct RunOutcome {
  RunKind kind = RunKind::kEcho;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or the abort diagnostic
  double final_loss = 0.0;
  std::optional<double> fidelity;
  std::optional<double> consistency;
  NfeReport nfe;
};

// Executes every (kind, seed) pair, writing one trace file per run plus
// metrics.csv and the resolved config.json into out_dir. Runs are ordered
// deterministically; jobs > 1 executes them on a small thread pool.
std::vector<RunOutcome> execute_runs(const ExperimentConfig& config,
                                     const World& world,
                                     const std::filesystem::path& out_dir,
                                     int jobs = 1);

std::filesystem::path trace_file_name(const std::filesystem::path& out_dir,
                                      RunKind kind, std::uint64_t seed);

// Nearest-rank percentile, p in (0, 1].
double percentile_nearest_rank(std::vector<double> values, double p);

struct Calibration {
  double delta1 = 0.0;  // 75th percentile of gated-step motion losses
  double delta2 = 0.0;  // 50th percentile
  std::size_t samples = 0;
};

// Runs the motion-guided student baseline over the seed list and reads the
// motion-loss distribution across gated steps.
Calibration calibrate(const ExperimentConfig& config, const World& world);

// Subcommand bodies shared by the CLI and the tests. Return process exit
// codes; diagnostics go to err.
int run_command(const std::filesystem::path& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::vector<std::uint64_t>>& seeds_override,
                bool force_deterministic, int jobs, std::ostream& err);
int calibrate_command(const std::filesystem::path& config_path,
                      const std::optional<std::string>& out_override,
                      std::ostream& err);
int compare_command(const std::vector<std::filesystem::path>& run_dirs,
                    const std::filesystem::path& out_dir, std::ostream& err);

}  // namespace echo
