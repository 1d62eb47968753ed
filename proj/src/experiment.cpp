#include "echo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "echo/trace_io.hpp"

namespace echo {

namespace fs = std::filesystem;

World build_world(const ExperimentConfig& config) {
  NoiseSchedule schedule = make_linear_schedule(
      config.schedule.total_steps, config.schedule.beta_start,
      config.schedule.beta_end);
  TimestepGrid student_grid =
      make_grid(config.schedule.total_steps, config.grids.student_steps);
  TimestepGrid teacher_grid =
      make_grid(config.schedule.total_steps, config.grids.teacher_steps);

  std::vector<MixtureComponent> components;
  for (std::size_t i = 0; i < config.components.size(); ++i) {
    const auto& spec = config.components[i];
    MixtureComponent comp;
    comp.weight = spec.weight;
    comp.variance = spec.variance;
    comp.label = spec.label;
    comp.mean =
        build_mean(spec.mean, config.reference.frames, config.reference.dim,
                   "mixture.components[" + std::to_string(i) + "].mean");
    components.push_back(std::move(comp));
  }
  MixtureModel mixture(std::move(components));

  ConditionLabel condition = config.condition
                                 ? ConditionLabel::named(*config.condition)
                                 : ConditionLabel::unconditional();
  ConditionLabel ref_condition =
      config.reference.condition
          ? ConditionLabel::named(*config.reference.condition)
          : ConditionLabel::unconditional();

  MotionParams motion;
  motion.drift = Eigen::Map<const Eigen::VectorXd>(
      config.reference.drift.data(),
      static_cast<Eigen::Index>(config.reference.drift.size()));
  motion.ar = config.reference.ar;
  motion.noise_scale = config.reference.noise_scale;

  RngStream ref_stream(config.reference.seed, "reference");
  LatentVideo reference =
      sample_reference(mixture, motion, config.reference.frames,
                       config.reference.dim, ref_stream);

  GuidanceConfig guidance = config.guidance;
  guidance.t_alpha = config.reference.t_alpha
                         ? *config.reference.t_alpha
                         : default_t_alpha(teacher_grid,
                                           config.schedule.total_steps);

  // Bundle construction uses its own teacher instance so inversion cost never
  // leaks into run traces.
  AnalyticTeacher bundle_teacher(mixture, schedule);
  ReferenceBundle bundle = build_reference_bundle(
      bundle_teacher, reference, ref_condition, teacher_grid, guidance.t_alpha,
      config.reference.keep_fraction, guidance.feature_mode);

  return World{std::move(schedule),
               std::move(student_grid),
               std::move(teacher_grid),
               std::move(mixture),
               StudentPerturbation{config.student.bias_amplitude,
                                   config.student.bias_seed},
               std::move(condition),
               std::move(ref_condition),
               std::move(reference),
               std::move(bundle),
               guidance};
}

std::unique_ptr<AnalyticTeacher> make_teacher(const World& world) {
  return std::make_unique<AnalyticTeacher>(world.mixture, world.schedule);
}

std::unique_ptr<DistilledStudent> make_student(const World& world) {
  return std::make_unique<DistilledStudent>(world.mixture, world.schedule,
                                            world.student_grid,
                                            world.perturbation);
}

std::filesystem::path trace_file_name(const std::filesystem::path& out_dir,
                                      RunKind kind, std::uint64_t seed) {
  return out_dir / (std::string(to_string(kind)) + "_seed" +
                    std::to_string(seed) + ".trace.jsonl");
}

namespace {

std::string opt_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void write_metrics_csv(const std::vector<RunOutcome>& outcomes,
                       const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + file.string() + " for writing");
  out << "kind,seed,status,final_motion_loss,motion_fidelity,"
         "temporal_consistency,student_nfe,teacher_nfe,gradient_evals,"
         "activated_steps,trunc_threshold,trunc_nmax,trunc_none\n";
  for (const RunOutcome& r : outcomes) {
    out << to_string(r.kind) << ',' << r.seed << ',' << r.status << ',';
    if (r.status == "ok") {
      out << format_double(r.final_loss) << ',' << opt_cell(r.fidelity) << ','
          << opt_cell(r.consistency) << ',' << r.nfe.student_nfe << ','
          << r.nfe.teacher_nfe << ',' << r.nfe.gradient_evals << ','
          << r.nfe.activated_steps << ',' << r.nfe.truncations_threshold << ','
          << r.nfe.truncations_nmax << ',' << r.nfe.truncations_none;
    } else {
      out << ",,,,,,,,,";
    }
    out << '\n';
  }
}

RunOutcome execute_one(const ExperimentConfig& config, const World& world,
                       RunKind kind, std::uint64_t seed,
                       const fs::path& out_dir) {
  RunOutcome outcome;
  outcome.kind = kind;
  outcome.seed = seed;
  try {
    auto teacher = make_teacher(world);
    auto student = make_student(world);
    RunInputs inputs{*student,          *teacher,
                     world.bundle,      world.condition,
                     world.student_grid, world.teacher_grid};
    auto [latent, trace] =
        run_baseline(kind, world.guidance, inputs, seed, config.deterministic);
    write_trace(trace, trace_file_name(out_dir, kind, seed));

    outcome.final_loss = final_motion_loss(latent, world.bundle);
    outcome.fidelity = motion_fidelity_toy(latent, world.reference_video);
    outcome.consistency = temporal_consistency_toy(latent);
    outcome.nfe = nfe_report(trace);
  } catch (const std::exception& e) {
    outcome.status = std::string("error: ") + e.what();
  }
  return outcome;
}

}  // namespace

std::vector<RunOutcome> execute_runs(const ExperimentConfig& config,
                                     const World& world,
                                     const fs::path& out_dir, int jobs) {
  fs::create_directories(out_dir);

  struct Task {
    RunKind kind;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (RunKind kind : config.kinds)
    for (std::uint64_t seed : config.seeds) tasks.push_back({kind, seed});

  std::vector<RunOutcome> outcomes(tasks.size());
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      outcomes[i] =
          execute_one(config, world, tasks[i].kind, tasks[i].seed, out_dir);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        outcomes[i] =
            execute_one(config, world, tasks[i].kind, tasks[i].seed, out_dir);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  write_metrics_csv(outcomes, out_dir / "metrics.csv");
  {
    std::ofstream cfg_out(out_dir / "config.json", std::ios::binary);
    ExperimentConfig resolved = config;
    resolved.reference.t_alpha = world.guidance.t_alpha;
    cfg_out << config_to_json(resolved).dump(2) << '\n';
  }
  return outcomes;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty())
    throw std::invalid_argument("percentile_nearest_rank: no samples");
  if (!(p > 0.0) || p > 1.0)
    throw std::invalid_argument("percentile_nearest_rank: p outside (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(values.size())));
  return values[rank - 1];
}

Calibration calibrate(const ExperimentConfig& config, const World& world) {
  std::vector<double> losses;
  for (std::uint64_t seed : config.seeds) {
    auto teacher = make_teacher(world);
    auto student = make_student(world);
    RunInputs inputs{*student,          *teacher,
                     world.bundle,      world.condition,
                     world.student_grid, world.teacher_grid};
    auto [latent, trace] = run_baseline(RunKind::kStudentMotion, world.guidance,
                                        inputs, seed, config.deterministic);
    (void)latent;
    for (const StepRecord& rec : trace.records)
      if (rec.stage != Stage::kNoGuidance) losses.push_back(rec.motion_loss);
  }
  if (losses.empty())
    throw std::runtime_error(
        "calibrate: no gated steps recorded; lower guidance.tau");
  Calibration cal;
  cal.samples = losses.size();
  cal.delta1 = percentile_nearest_rank(losses, 0.75);
  cal.delta2 = percentile_nearest_rank(losses, 0.50);
  return cal;
}

namespace {

struct MetricsTable {
  // column name -> per-row optional value; plus row keys
  std::vector<std::map<std::string, std::string>> rows;
  std::vector<std::string> columns;
};

MetricsTable read_metrics_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  MetricsTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(file.string() + ": empty metrics file");
  std::stringstream header(line);
  std::string col;
  while (std::getline(header, col, ',')) table.columns.push_back(col);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::map<std::string, std::string> row;
    std::stringstream ss(line);
    for (const std::string& c : table.columns) {
      std::string cell;
      std::getline(ss, cell, ',');
      row[c] = cell;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct Stats {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) /
                          static_cast<double>(v.size()));
  }
  return s;
}

// Guidance fields that can serve as a sweep axis.
const std::vector<std::string> kAxisFields = {
    "omega_student", "omega_teacher", "eta",    "lambda", "tau",
    "k",             "delta1",        "delta2", "window", "n_max",
    "inner_start_fraction"};

}  // namespace

int run_command(const fs::path& config_path,
                const std::optional<std::string>& out_override,
                const std::optional<std::vector<std::uint64_t>>& seeds_override,
                bool force_deterministic, int jobs, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config_file(config_path);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }
  if (out_override) config.out_dir = *out_override;
  if (seeds_override) config.seeds = *seeds_override;
  if (force_deterministic) config.deterministic = true;

  for (const std::string& w : config.guidance.validate())
    err << "warning: " << w << "\n";

  try {
    World world = build_world(config);
    auto outcomes = execute_runs(config, world, config.out_dir, jobs);
    bool all_ok = true;
    for (const RunOutcome& r : outcomes)
      if (r.status != "ok") {
        err << to_string(r.kind) << " seed " << r.seed << ": " << r.status
            << "\n";
        all_ok = false;
      }
    return all_ok ? 0 : 3;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return 2;
  }
}

int calibrate_command(const fs::path& config_path,
                      const std::optional<std::string>& out_override,
                      std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config_file(config_path);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }
  if (out_override) config.out_dir = *out_override;
  try {
    World world = build_world(config);
    Calibration cal = calibrate(config, world);
    fs::create_directories(config.out_dir);
    fs::path file = fs::path(config.out_dir) / "calibration.json";
    std::ofstream out(file, std::ios::binary);
    json j{{"delta1", cal.delta1},
           {"delta2", cal.delta2},
           {"samples", cal.samples}};
    out << j.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "calibrate failed: " << e.what() << "\n";
    return 2;
  }
}

int compare_command(const std::vector<fs::path>& run_dirs,
                    const fs::path& out_dir, std::ostream& err) {
  if (run_dirs.empty()) {
    err << "compare: no run directories given\n";
    return 1;
  }
  try {
    std::vector<json> configs;
    std::vector<MetricsTable> tables;
    for (const fs::path& dir : run_dirs) {
      std::ifstream cfg_in(dir / "config.json");
      if (!cfg_in)
        throw std::runtime_error("missing config.json in " + dir.string());
      json cfg;
      cfg_in >> cfg;
      configs.push_back(std::move(cfg));
      tables.push_back(read_metrics_csv(dir / "metrics.csv"));
    }

    // Refuse to compare runs from different worlds.
    const std::vector<std::string> world_keys = {
        "schedule", "grids", "mixture", "reference", "student", "condition"};
    for (std::size_t i = 1; i < configs.size(); ++i)
      for (const std::string& key : world_keys)
        if (configs[i].value(key, json()) != configs[0].value(key, json()))
          throw std::runtime_error(
              "world mismatch between " + run_dirs[0].string() + " and " +
              run_dirs[i].string() + " (field: " + key + ")");

    // Axis: the single guidance field that differs across directories.
    std::string axis = "run_dir";
    std::vector<std::string> differing;
    for (const std::string& field : kAxisFields) {
      bool differs = false;
      for (std::size_t i = 1; i < configs.size(); ++i)
        if (configs[i]["guidance"].value(field, json()) !=
            configs[0]["guidance"].value(field, json()))
          differs = true;
      if (differs) differing.push_back(field);
    }
    if (differing.size() == 1) axis = differing[0];

    auto axis_value = [&](std::size_t i) -> std::string {
      if (axis == "run_dir") return std::to_string(i);
      const json& v = configs[i]["guidance"][axis];
      if (v.is_string()) return v.get<std::string>();
      return format_double(v.get<double>());
    };

    const std::vector<std::string> metric_cols = {
        "final_motion_loss", "motion_fidelity", "temporal_consistency",
        "student_nfe",       "teacher_nfe",     "gradient_evals"};

    fs::create_directories(out_dir);
    std::ofstream table_out(out_dir / "compare.csv", std::ios::binary);
    table_out << "run_dir,axis,axis_value,kind";
    for (const auto& m : metric_cols)
      table_out << ',' << m << "_mean," << m << "_stderr";
    table_out << '\n';

    std::ofstream series_out(out_dir / "series.csv", std::ios::binary);
    series_out << "axis,axis_value,kind,metric,mean,stderr\n";

    for (std::size_t i = 0; i < run_dirs.size(); ++i) {
      // Group rows by kind, preserving first-seen order.
      std::vector<std::string> kinds;
      std::map<std::string, std::vector<std::map<std::string, std::string>>>
          by_kind;
      for (const auto& row : tables[i].rows) {
        const std::string& kind = row.at("kind");
        if (!by_kind.contains(kind)) kinds.push_back(kind);
        by_kind[kind].push_back(row);
      }
      for (const std::string& kind : kinds) {
        table_out << run_dirs[i].string() << ',' << axis << ','
                  << axis_value(i) << ',' << kind;
        for (const std::string& m : metric_cols) {
          std::vector<double> vals;
          for (const auto& row : by_kind[kind]) {
            const std::string& cell = row.at(m);
            if (row.at("status") == "ok" && !cell.empty())
              vals.push_back(std::strtod(cell.c_str(), nullptr));
          }
          Stats s = stats_of(vals);
          table_out << ',' << format_double(s.mean) << ','
                    << format_double(s.stderr_);
          series_out << axis << ',' << axis_value(i) << ',' << kind << ','
                     << m << ',' << format_double(s.mean) << ','
                     << format_double(s.stderr_) << '\n';
        }
        table_out << '\n';
      }
    }
    return 0;
  } catch (const std::exception& e) {
    err << "compare failed: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace echo
