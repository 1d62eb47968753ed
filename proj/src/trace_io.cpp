#include "echo/trace_io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace echo {

namespace {

json latent_to_json(const LatentVideo& z) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < z.cols(); ++c) row.push_back(z(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

LatentVideo latent_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw std::runtime_error("trace: malformed latent");
  auto rows = static_cast<Eigen::Index>(j.size());
  auto cols = static_cast<Eigen::Index>(j[0].size());
  LatentVideo z(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      z(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                    .get<double>();
  return z;
}

}  // namespace

json step_record_to_json(const StepRecord& rec) {
  json j{{"type", "step"},
         {"t", rec.t},
         {"motion_loss", rec.motion_loss},
         {"stage", to_string(rec.stage)},
         {"inner_steps", rec.inner_steps},
         {"truncated_by", to_string(rec.truncated_by)},
         {"student_nfe", rec.student_nfe},
         {"teacher_nfe", rec.teacher_nfe},
         {"grad_evals", rec.grad_evals},
         {"inner_losses", rec.inner_losses}};
  j["window_avg"] = rec.window_avg ? json(*rec.window_avg) : json(nullptr);
  return j;
}

StepRecord step_record_from_json(const json& j) {
  StepRecord rec;
  rec.t = j.at("t").get<int>();
  rec.motion_loss = j.at("motion_loss").get<double>();
  if (!j.at("window_avg").is_null())
    rec.window_avg = j.at("window_avg").get<double>();
  rec.stage = stage_from_string(j.at("stage").get<std::string>());
  rec.inner_steps = j.at("inner_steps").get<int>();
  rec.truncated_by =
      truncation_from_string(j.at("truncated_by").get<std::string>());
  rec.student_nfe = j.at("student_nfe").get<std::int64_t>();
  rec.teacher_nfe = j.at("teacher_nfe").get<std::int64_t>();
  rec.grad_evals = j.at("grad_evals").get<std::int64_t>();
  rec.inner_losses = j.at("inner_losses").get<std::vector<double>>();
  return rec;
}

void write_trace(const SamplerTrace& trace, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_trace: cannot open " + file.string());

  json header{{"type", "header"},
              {"kind", to_string(trace.kind)},
              {"seed", trace.seed},
              {"deterministic", trace.deterministic},
              {"config", guidance_to_json(trace.config)}};
  out << header.dump() << '\n';
  for (const StepRecord& rec : trace.records)
    out << step_record_to_json(rec).dump() << '\n';
  json final{{"type", "final"}, {"latent", latent_to_json(trace.final_latent)}};
  out << final.dump() << '\n';
}

SamplerTrace read_trace(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("read_trace: cannot open " + file.string());

  SamplerTrace trace;
  std::string line;
  bool saw_header = false, saw_final = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      trace.kind = run_kind_from_string(j.at("kind").get<std::string>());
      trace.seed = j.at("seed").get<std::uint64_t>();
      trace.deterministic = j.at("deterministic").get<bool>();
      trace.config = guidance_from_json(j.at("config"), "config");
      saw_header = true;
    } else if (type == "step") {
      trace.records.push_back(step_record_from_json(j));
    } else if (type == "final") {
      trace.final_latent = latent_from_json(j.at("latent"));
      saw_final = true;
    } else {
      throw std::runtime_error("read_trace: unknown line type '" + type + "'");
    }
  }
  if (!saw_header || !saw_final)
    throw std::runtime_error("read_trace: truncated trace file " +
                             file.string());
  return trace;
}

bool trace_equal(const SamplerTrace& a, const SamplerTrace& b) {
  if (a.kind != b.kind || a.seed != b.seed ||
      a.deterministic != b.deterministic)
    return false;
  if (a.records.size() != b.records.size()) return false;
  if (guidance_to_json(a.config) != guidance_to_json(b.config)) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const StepRecord& x = a.records[i];
    const StepRecord& y = b.records[i];
    if (x.t != y.t || x.motion_loss != y.motion_loss ||
        x.window_avg != y.window_avg || x.stage != y.stage ||
        x.inner_steps != y.inner_steps || x.truncated_by != y.truncated_by ||
        x.student_nfe != y.student_nfe || x.teacher_nfe != y.teacher_nfe ||
        x.grad_evals != y.grad_evals || x.inner_losses != y.inner_losses)
      return false;
  }
  return a.final_latent.rows() == b.final_latent.rows() &&
         a.final_latent.cols() == b.final_latent.cols() &&
         (a.final_latent.array() == b.final_latent.array()).all();
}

}  // namespace echo
