#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "echo/guidance.hpp"

namespace echo {

using nlohmann::json;

// Shortest round-trip decimal representation (used for CSV emission so reruns
// are byte-identical).
std::string format_double(double v);

// Error type for configuration problems; the message carries the field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Infinite thresholds are encoded as the strings "inf" / "-inf" since JSON
// has no infinity literal.
json double_to_json_allow_inf(double v);
double double_from_json_allow_inf(const json& j, const std::string& path);

json guidance_to_json(const GuidanceConfig& config);
GuidanceConfig guidance_from_json(const json& j, const std::string& path);

const char* to_string(FeatureMode m);
const char* to_string(GradientMode m);
FeatureMode feature_mode_from_string(const std::string& s);
GradientMode gradient_mode_from_string(const std::string& s);

}  // namespace echo
