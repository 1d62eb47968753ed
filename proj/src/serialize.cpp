#include "echo/serialize.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace echo {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

json double_to_json_allow_inf(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

double double_from_json_allow_inf(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError(path + ": expected a number or \"inf\"/\"-inf\"");
}

const char* to_string(FeatureMode m) {
  return m == FeatureMode::kPredictedClean ? "predicted_clean" : "noisy_latent";
}

const char* to_string(GradientMode m) {
  return m == GradientMode::kAnalytic ? "analytic" : "finite_difference";
}

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "predicted_clean") return FeatureMode::kPredictedClean;
  if (s == "noisy_latent") return FeatureMode::kNoisyLatent;
  throw ConfigError("unknown feature_mode '" + s + "'");
}

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "analytic") return GradientMode::kAnalytic;
  if (s == "finite_difference") return GradientMode::kFiniteDifference;
  throw ConfigError("unknown gradient_mode '" + s + "'");
}

json guidance_to_json(const GuidanceConfig& c) {
  return json{{"omega_student", c.omega_student},
              {"omega_teacher", c.omega_teacher},
              {"eta", c.eta},
              {"lambda", c.lambda},
              {"tau", c.tau},
              {"k", c.k},
              {"delta1", double_to_json_allow_inf(c.delta1)},
              {"delta2", double_to_json_allow_inf(c.delta2)},
              {"window", c.window},
              {"n_max", c.n_max},
              {"t_alpha", c.t_alpha},
              {"inner_start_fraction", c.inner_start_fraction},
              {"feature_mode", to_string(c.feature_mode)},
              {"gradient_mode", to_string(c.gradient_mode)}};
}

namespace {
const json& member(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing field");
  return *it;
}

double num(const json& j, const char* key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_number())
    throw ConfigError(path + "." + key + ": expected a number");
  return v.get<double>();
}

int integer(const json& j, const char* key, const std::string& path) {
  const json& v = member(j, key, path);
  if (!v.is_number_integer())
    throw ConfigError(path + "." + key + ": expected an integer");
  return v.get<int>();
}
}  // namespace

GuidanceConfig guidance_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  GuidanceConfig c;
  c.omega_student = num(j, "omega_student", path);
  c.omega_teacher = num(j, "omega_teacher", path);
  c.eta = num(j, "eta", path);
  c.lambda = num(j, "lambda", path);
  c.tau = num(j, "tau", path);
  c.k = num(j, "k", path);
  c.delta1 = double_from_json_allow_inf(member(j, "delta1", path),
                                        path + ".delta1");
  c.delta2 = double_from_json_allow_inf(member(j, "delta2", path),
                                        path + ".delta2");
  c.window = integer(j, "window", path);
  c.n_max = integer(j, "n_max", path);
  if (j.contains("t_alpha") && !j["t_alpha"].is_null())
    c.t_alpha = integer(j, "t_alpha", path);
  c.inner_start_fraction = num(j, "inner_start_fraction", path);
  if (j.contains("feature_mode"))
    c.feature_mode = feature_mode_from_string(
        member(j, "feature_mode", path).get<std::string>());
  if (j.contains("gradient_mode"))
    c.gradient_mode = gradient_mode_from_string(
        member(j, "gradient_mode", path).get<std::string>());

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

}  // namespace echo
