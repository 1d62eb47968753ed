#include "echo/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace echo {

namespace {

const json& member(const json& j, const std::string& key,
                   const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing field");
  return *it;
}

double num_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

int int_at(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<int>();
}

std::uint64_t uint_at(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer())
    throw ConfigError(path + ": expected a non-negative integer");
  auto v = j.get<std::int64_t>();
  if (v < 0) throw ConfigError(path + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> vec_at(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(num_at(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

MeanSpec mean_from_json(const json& j, const std::string& path) {
  MeanSpec m;
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  std::string kind = member(j, "kind", path).get<std::string>();
  if (kind == "constant") {
    m.kind = MeanSpec::Kind::kConstant;
    m.frame = vec_at(member(j, "frame", path), path + ".frame");
  } else if (kind == "drift_ramp") {
    m.kind = MeanSpec::Kind::kDriftRamp;
    m.start = vec_at(member(j, "start", path), path + ".start");
    m.step = vec_at(member(j, "step", path), path + ".step");
  } else if (kind == "explicit") {
    m.kind = MeanSpec::Kind::kExplicit;
    const json& rows = member(j, "rows", path);
    if (!rows.is_array() || rows.empty())
      throw ConfigError(path + ".rows: expected a non-empty array");
    for (std::size_t r = 0; r < rows.size(); ++r)
      m.rows.push_back(
          vec_at(rows[r], path + ".rows[" + std::to_string(r) + "]"));
  } else {
    throw ConfigError(path + ".kind: unknown mean kind '" + kind + "'");
  }
  return m;
}

json mean_to_json(const MeanSpec& m) {
  switch (m.kind) {
    case MeanSpec::Kind::kConstant:
      return json{{"kind", "constant"}, {"frame", m.frame}};
    case MeanSpec::Kind::kDriftRamp:
      return json{{"kind", "drift_ramp"}, {"start", m.start}, {"step", m.step}};
    case MeanSpec::Kind::kExplicit:
      return json{{"kind", "explicit"}, {"rows", m.rows}};
  }
  return {};
}

}  // namespace

LatentVideo build_mean(const MeanSpec& spec, int frames, int dim,
                       const std::string& path) {
  LatentVideo mean(frames, dim);
  auto check_dim = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) != dim)
      throw ConfigError(path + "." + name + ": expected " +
                        std::to_string(dim) + " entries, got " +
                        std::to_string(v.size()));
  };
  switch (spec.kind) {
    case MeanSpec::Kind::kConstant: {
      check_dim(spec.frame, "frame");
      for (int f = 0; f < frames; ++f)
        for (int d = 0; d < dim; ++d) mean(f, d) = spec.frame[static_cast<std::size_t>(d)];
      break;
    }
    case MeanSpec::Kind::kDriftRamp: {
      check_dim(spec.start, "start");
      check_dim(spec.step, "step");
      for (int f = 0; f < frames; ++f)
        for (int d = 0; d < dim; ++d)
          mean(f, d) = spec.start[static_cast<std::size_t>(d)] +
                       f * spec.step[static_cast<std::size_t>(d)];
      break;
    }
    case MeanSpec::Kind::kExplicit: {
      if (static_cast<int>(spec.rows.size()) != frames)
        throw ConfigError(path + ".rows: expected " + std::to_string(frames) +
                          " rows, got " + std::to_string(spec.rows.size()));
      for (int f = 0; f < frames; ++f) {
        check_dim(spec.rows[static_cast<std::size_t>(f)], "rows[]");
        for (int d = 0; d < dim; ++d)
          mean(f, d) = spec.rows[static_cast<std::size_t>(f)]
                                [static_cast<std::size_t>(d)];
      }
      break;
    }
  }
  return mean;
}

int default_t_alpha(const TimestepGrid& fine_grid, int total_steps) {
  double target = 0.4 * total_steps;
  int best = fine_grid.steps.front();
  double best_dist = std::abs(best - target);
  for (int s : fine_grid.steps) {
    double d = std::abs(s - target);
    if (d < best_dist || (d == best_dist && s < best)) {
      best = s;
      best_dist = d;
    }
  }
  return best;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig c;

  const json& sched = member(j, "schedule", "config");
  c.schedule.total_steps = int_at(member(sched, "total_steps", "schedule"),
                                  "schedule.total_steps");
  c.schedule.beta_start =
      num_at(member(sched, "beta_start", "schedule"), "schedule.beta_start");
  c.schedule.beta_end =
      num_at(member(sched, "beta_end", "schedule"), "schedule.beta_end");

  const json& grids = member(j, "grids", "config");
  c.grids.student_steps =
      int_at(member(grids, "student_steps", "grids"), "grids.student_steps");
  c.grids.teacher_steps =
      int_at(member(grids, "teacher_steps", "grids"), "grids.teacher_steps");

  const json& mix = member(j, "mixture", "config");
  const json& comps = member(mix, "components", "mixture");
  if (!comps.is_array() || comps.empty())
    throw ConfigError("mixture.components: expected a non-empty array");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    std::string path = "mixture.components[" + std::to_string(i) + "]";
    const json& cj = comps[i];
    ComponentSpec spec;
    spec.weight = num_at(member(cj, "weight", path), path + ".weight");
    spec.variance = num_at(member(cj, "variance", path), path + ".variance");
    spec.label = member(cj, "label", path).get<std::string>();
    spec.mean = mean_from_json(member(cj, "mean", path), path + ".mean");
    c.components.push_back(std::move(spec));
  }

  const json& ref = member(j, "reference", "config");
  c.reference.frames = int_at(member(ref, "frames", "reference"),
                              "reference.frames");
  c.reference.dim = int_at(member(ref, "dim", "reference"), "reference.dim");
  const json& motion = member(ref, "motion", "reference");
  c.reference.drift =
      vec_at(member(motion, "drift", "reference.motion"),
             "reference.motion.drift");
  c.reference.ar =
      num_at(member(motion, "ar", "reference.motion"), "reference.motion.ar");
  c.reference.noise_scale = num_at(member(motion, "noise_scale",
                                          "reference.motion"),
                                   "reference.motion.noise_scale");
  c.reference.seed = uint_at(member(ref, "seed", "reference"),
                             "reference.seed");
  if (ref.contains("condition") && !ref["condition"].is_null())
    c.reference.condition = ref["condition"].get<std::string>();
  if (ref.contains("t_alpha") && !ref["t_alpha"].is_null())
    c.reference.t_alpha = int_at(ref["t_alpha"], "reference.t_alpha");
  c.reference.keep_fraction = num_at(member(ref, "keep_fraction", "reference"),
                                     "reference.keep_fraction");

  const json& student = member(j, "student", "config");
  c.student.bias_amplitude = num_at(member(student, "bias_amplitude", "student"),
                                    "student.bias_amplitude");
  c.student.bias_seed =
      uint_at(member(student, "bias_seed", "student"), "student.bias_seed");

  c.guidance = guidance_from_json(member(j, "guidance", "config"), "guidance");

  if (j.contains("condition") && !j["condition"].is_null())
    c.condition = j["condition"].get<std::string>();

  const json& seeds = member(j, "seeds", "config");
  if (!seeds.is_array() || seeds.empty())
    throw ConfigError("seeds: expected a non-empty array");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    c.seeds.push_back(uint_at(seeds[i], "seeds[" + std::to_string(i) + "]"));

  const json& kinds = member(j, "kinds", "config");
  if (!kinds.is_array() || kinds.empty())
    throw ConfigError("kinds: expected a non-empty array");
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    try {
      c.kinds.push_back(run_kind_from_string(kinds[i].get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("kinds[" + std::to_string(i) + "]: " + e.what());
    }
  }

  if (j.contains("deterministic"))
    c.deterministic = j["deterministic"].get<bool>();
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json comps = json::array();
  for (const auto& comp : c.components)
    comps.push_back(json{{"weight", comp.weight},
                         {"variance", comp.variance},
                         {"label", comp.label},
                         {"mean", mean_to_json(comp.mean)}});

  json ref{{"frames", c.reference.frames},
           {"dim", c.reference.dim},
           {"motion",
            json{{"drift", c.reference.drift},
                 {"ar", c.reference.ar},
                 {"noise_scale", c.reference.noise_scale}}},
           {"seed", c.reference.seed},
           {"keep_fraction", c.reference.keep_fraction}};
  ref["condition"] =
      c.reference.condition ? json(*c.reference.condition) : json(nullptr);
  ref["t_alpha"] = c.reference.t_alpha ? json(*c.reference.t_alpha)
                                       : json(nullptr);

  json j{{"schedule",
          json{{"total_steps", c.schedule.total_steps},
               {"beta_start", c.schedule.beta_start},
               {"beta_end", c.schedule.beta_end}}},
         {"grids",
          json{{"student_steps", c.grids.student_steps},
               {"teacher_steps", c.grids.teacher_steps}}},
         {"mixture", json{{"components", comps}}},
         {"reference", ref},
         {"student",
          json{{"bias_amplitude", c.student.bias_amplitude},
               {"bias_seed", c.student.bias_seed}}},
         {"guidance", guidance_to_json(c.guidance)},
         {"seeds", c.seeds},
         {"deterministic", c.deterministic},
         {"out_dir", c.out_dir}};
  j["condition"] = c.condition ? json(*c.condition) : json(nullptr);
  json kinds = json::array();
  for (RunKind k : c.kinds) kinds.push_back(to_string(k));
  j["kinds"] = kinds;
  return j;
}

ExperimentConfig load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in)
    throw ConfigError("cannot open config file " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + file.string() + ": " +
                      e.what());
  }
  ExperimentConfig c = config_from_json(j);
  validate_config(c);
  return c;
}

void validate_config(const ExperimentConfig& c) {
  if (c.schedule.total_steps < 1)
    throw ConfigError("schedule.total_steps: must be >= 1");
  if (!(c.schedule.beta_start > 0.0) || !(c.schedule.beta_end < 1.0) ||
      c.schedule.beta_start > c.schedule.beta_end)
    throw ConfigError("schedule: betas must satisfy 0 < beta_start <= beta_end < 1");

  if (c.grids.student_steps < 1 || c.grids.teacher_steps < 1)
    throw ConfigError("grids: step counts must be >= 1");
  if (c.schedule.total_steps % c.grids.student_steps != 0)
    throw ConfigError("grids.student_steps: must divide schedule.total_steps");
  if (c.schedule.total_steps % c.grids.teacher_steps != 0)
    throw ConfigError("grids.teacher_steps: must divide schedule.total_steps");
  if (c.grids.teacher_steps % c.grids.student_steps != 0)
    throw ConfigError(
        "grids.teacher_steps: must be a multiple of grids.student_steps");

  if (c.reference.frames < 2)
    throw ConfigError("reference.frames: must be >= 2");
  if (c.reference.dim < 1) throw ConfigError("reference.dim: must be >= 1");
  if (static_cast<int>(c.reference.drift.size()) != c.reference.dim)
    throw ConfigError("reference.motion.drift: expected reference.dim entries");
  if (!(c.reference.noise_scale >= 0.0))
    throw ConfigError("reference.motion.noise_scale: must be >= 0");
  if (!(c.reference.keep_fraction > 0.0) || c.reference.keep_fraction > 1.0)
    throw ConfigError("reference.keep_fraction: must lie in (0, 1]");
  if (!(c.student.bias_amplitude >= 0.0))
    throw ConfigError("student.bias_amplitude: must be >= 0");

  double wsum = 0.0;
  std::set<std::string> labels;
  for (std::size_t i = 0; i < c.components.size(); ++i) {
    const auto& comp = c.components[i];
    std::string path = "mixture.components[" + std::to_string(i) + "]";
    if (!(comp.weight > 0.0)) throw ConfigError(path + ".weight: must be > 0");
    if (!(comp.variance > 0.0))
      throw ConfigError(path + ".variance: must be > 0");
    wsum += comp.weight;
    labels.insert(comp.label);
    build_mean(comp.mean, c.reference.frames, c.reference.dim, path + ".mean");
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw ConfigError("mixture.components: weights sum to " +
                      format_double(wsum) + ", expected 1");

  if (c.condition && !labels.contains(*c.condition))
    throw ConfigError("condition: unknown label '" + *c.condition + "'");
  if (c.reference.condition && !labels.contains(*c.reference.condition))
    throw ConfigError("reference.condition: unknown label '" +
                      *c.reference.condition + "'");

  TimestepGrid fine = make_grid(c.schedule.total_steps, c.grids.teacher_steps);
  if (c.reference.t_alpha) {
    if (!fine.contains(*c.reference.t_alpha))
      throw ConfigError("reference.t_alpha: " +
                        std::to_string(*c.reference.t_alpha) +
                        " is not a teacher-grid step");
  }

  try {
    c.guidance.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("guidance: ") + e.what());
  }
}

}  // namespace echo
