#pragma once

#include <filesystem>

#include "echo/echo_sampler.hpp"
#include "echo/serialize.hpp"

namespace echo {

// Traces are stored as line-delimited JSON: a header line, one line per step
// record, and a final line carrying the output latent.
void write_trace(const SamplerTrace& trace, const std::filesystem::path& file);
SamplerTrace read_trace(const std::filesystem::path& file);

json step_record_to_json(const StepRecord& rec);
StepRecord step_record_from_json(const json& j);

bool trace_equal(const SamplerTrace& a, const SamplerTrace& b);

}  // namespace echo
