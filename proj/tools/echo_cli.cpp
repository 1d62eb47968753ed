// Experiment runner: loads a config, builds the toy world and reference
// bundle, executes the requested sampler runs over the seed list, and emits
// traces, metrics and plot-ready comparison data.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "echo/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive test-time distillation sampler on analytic toy worlds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  bool deterministic = false;
  int jobs = 1;

  CLI::App* run = app.add_subcommand("run", "Execute runs from a config file");
  run->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_option("--seeds", seeds, "Override the seed list");
  run->add_flag("--deterministic", deterministic,
                "Force zero-noise renoising (golden traces)");
  run->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::Range(1, 256));

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "Suggest activation/truncation "
                                      "thresholds from a baseline sweep");
  calibrate->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  calibrate->add_option("--out", out_dir, "Override the output directory");

  std::vector<std::string> run_dirs;
  std::string compare_out = ".";
  CLI::App* compare =
      app.add_subcommand("compare", "Tabulate metrics across run directories");
  compare->add_option("dirs", run_dirs, "Run directories from `run`")
      ->required()
      ->expected(-1);
  compare->add_option("--out", compare_out, "Directory for comparison files");

  CLI11_PARSE(app, argc, argv);

  std::optional<std::string> out_override =
      out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir);
  std::optional<std::vector<std::uint64_t>> seeds_override =
      seeds.empty() ? std::nullopt
                    : std::optional<std::vector<std::uint64_t>>(seeds);

  if (run->parsed())
    return echo::run_command(config_path, out_override, seeds_override,
                             deterministic, jobs, std::cerr);
  if (calibrate->parsed())
    return echo::calibrate_command(config_path, out_override, std::cerr);
  if (compare->parsed()) {
    std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
    return echo::compare_command(dirs, compare_out, std::cerr);
  }
  return 1;
}
