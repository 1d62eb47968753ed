#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "echo/guidance.hpp"
#include "echo/latent.hpp"
#include "echo/motion.hpp"
#include "echo/rng.hpp"
#include "echo/schedule.hpp"
#include "echo/toyworld.hpp"

namespace echo {

enum class Stage { kNoGuidance, kMotionOnly, kTeacherGuided };
enum class Truncation { kThreshold, kNMax, kNone };
enum class RunKind { kEcho, kStudentPlain, kStudentMotion, kAlwaysTeacher };

// Audit record of one student step.
struct StepRecord {
  int t = 0;
  double motion_loss = 0.0;
  std::optional<double> window_avg;  // absent when no decision was evaluated
  Stage stage = Stage::kNoGuidance;
  int inner_steps = 0;
  Truncation truncated_by = Truncation::kNone;
  std::int64_t student_nfe = 0;
  std::int64_t teacher_nfe = 0;
  std::int64_t grad_evals = 0;
  std::vector<double> inner_losses;  // teacher pre-iteration losses
};

struct SamplerTrace {
  std::vector<StepRecord> records;
  GuidanceConfig config;
  RunKind kind = RunKind::kEcho;
  std::uint64_t seed = 0;
  bool deterministic = false;
  LatentVideo final_latent;
};

// Ring of the most recent motion-loss values, capacity W.
class LossHistory {
 public:
  explicit LossHistory(int capacity);

  void push(double loss);
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  double mean() const;

 private:
  std::deque<double> values_;
  std::size_t capacity_;
};

// Activation predicate: true when the window mean exceeds delta1. An empty
// history activates unconditionally (cold start).
bool should_activate(const LossHistory& history, double delta1);

// Everything a run needs besides the scalar knobs.
struct RunInputs {
  const DenoiserModel& student;
  const DenoiserModel& teacher;
  const ReferenceBundle& bundle;
  ConditionLabel condition;
  TimestepGrid student_grid;
  TimestepGrid teacher_grid;
};

struct TeacherRefineResult {
  LatentVideo x0_teacher;
  int inner_steps = 0;
  Truncation truncated_by = Truncation::kNone;
  std::vector<double> inner_losses;
  std::int64_t grad_evals = 0;
};

// Inner teacher refinement for the student interval (t, t - student_stride):
// renoises the unguided endpoint to an intermediate teacher step, iterates
// guided teacher updates with a check-then-step truncation rule, then emits
// the teacher's endpoint prediction at t - student_stride. Requires
// t > student_stride so the emission timestep stays positive.
TeacherRefineResult teacher_refine(const LatentVideo& x0_unguided, int t,
                                   const GuidanceConfig& config,
                                   const DenoiserModel& teacher,
                                   const ReferenceBundle& bundle,
                                   const ConditionLabel& c,
                                   const TimestepGrid& teacher_grid,
                                   int student_stride, GaussianSource& noise);

// Intermediate start step for the inner loop: inner_start_fraction of the way
// down the interval, snapped down to the teacher grid, clamped inside it.
int select_inner_start(int t, int student_stride, int teacher_stride,
                       double inner_start_fraction);

// The adaptive sampler: per student step, a guided and an unguided endpoint,
// gated motion guidance, window-triggered teacher refinement with endpoint
// interpolation, and renoising to the next step. Noise comes from three
// independent named streams (init / student / teacher) so degenerate
// configurations reproduce the corresponding baselines exactly.
std::pair<LatentVideo, SamplerTrace> run_echo(const GuidanceConfig& config,
                                              const RunInputs& inputs,
                                              std::uint64_t seed,
                                              bool deterministic = false);

// Baselines are the sampler under pinned knobs: StudentPlain gates everything
// off (tau = 1), StudentMotion never activates (delta1 = +inf), AlwaysTeacher
// always activates (delta1 = -inf).
std::pair<LatentVideo, SamplerTrace> run_baseline(RunKind kind,
                                                  const GuidanceConfig& config,
                                                  const RunInputs& inputs,
                                                  std::uint64_t seed,
                                                  bool deterministic = false);

const char* to_string(Stage s);
const char* to_string(Truncation t);
const char* to_string(RunKind k);
Stage stage_from_string(const std::string& s);
Truncation truncation_from_string(const std::string& s);
RunKind run_kind_from_string(const std::string& s);

}  // namespace echo
