#include "echo/echo_sampler.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "echo/inversion.hpp"

namespace echo {

LossHistory::LossHistory(int capacity)
    : capacity_(static_cast<std::size_t>(capacity)) {
  if (capacity < 1)
    throw std::invalid_argument("LossHistory: capacity must be >= 1");
}

void LossHistory::push(double loss) {
  values_.push_back(loss);
  if (values_.size() > capacity_) values_.pop_front();
}

double LossHistory::mean() const {
  if (values_.empty())
    throw std::logic_error("LossHistory::mean: empty history");
  double sum = std::accumulate(values_.begin(), values_.end(), 0.0);
  return sum / static_cast<double>(values_.size());
}

bool should_activate(const LossHistory& history, double delta1) {
  // Cold start: the window mean is undefined, treat it as +inf so every
  // finite threshold activates while delta1 = +inf stays off entirely.
  if (history.empty())
    return delta1 < std::numeric_limits<double>::infinity();
  return history.mean() > delta1;
}

int select_inner_start(int t, int student_stride, int teacher_stride,
                       double inner_start_fraction) {
  double raw = static_cast<double>(t) - inner_start_fraction * student_stride;
  int snapped =
      static_cast<int>(std::floor(raw / teacher_stride)) * teacher_stride;
  int t_target = t - student_stride;
  if (snapped <= t_target) snapped = t_target + teacher_stride;
  if (snapped >= t) snapped = t - teacher_stride;
  return snapped;
}

namespace {

// Loss at (z, n), reusing the conditional prediction when the feature needs
// one. Returns the prediction so the caller can reuse it at the same state.
struct LossEval {
  double loss;
  LatentVideo eps_cond;  // empty in noisy-latent mode
};

LossEval eval_loss(const LatentVideo& z, const ReferenceBundle& bundle,
                   const DenoiserModel& model, const ConditionLabel& c, int n) {
  LossEval out;
  if (bundle.feature_mode == FeatureMode::kNoisyLatent) {
    out.loss = motion_loss_from_eps(z, LatentVideo(), bundle, model.schedule(),
                                    n);
    return out;
  }
  out.eps_cond = model.predict_epsilon(z, c, n);
  out.loss = motion_loss_from_eps(z, out.eps_cond, bundle, model.schedule(), n);
  return out;
}

LatentVideo gradient(const LatentVideo& z, const LatentVideo& eps_cond,
                     const ReferenceBundle& bundle, const DenoiserModel& model,
                     const ConditionLabel& c, int t, GradientMode mode) {
  if (mode == GradientMode::kFiniteDifference)
    return motion_loss_grad(z, bundle, model, c, t,
                            GradientMode::kFiniteDifference);
  if (bundle.feature_mode == FeatureMode::kNoisyLatent)
    return motion_loss_grad(z, bundle, model, c, t, GradientMode::kAnalytic);
  return motion_loss_grad_from_eps(z, eps_cond, bundle, model, c, t);
}

void require_finite(const LatentVideo& z, int t, Stage stage,
                    const char* what) {
  if (!all_finite(z))
    throw std::runtime_error(std::string("run_echo: non-finite ") + what +
                             " at t = " + std::to_string(t) +
                             ", stage = " + to_string(stage));
}

}  // namespace

TeacherRefineResult teacher_refine(const LatentVideo& x0_unguided, int t,
                                   const GuidanceConfig& config,
                                   const DenoiserModel& teacher,
                                   const ReferenceBundle& bundle,
                                   const ConditionLabel& c,
                                   const TimestepGrid& teacher_grid,
                                   int student_stride, GaussianSource& noise) {
  if (t <= student_stride)
    throw std::invalid_argument(
        "teacher_refine: t = " + std::to_string(t) +
        " leaves no interval above t = " + std::to_string(t - student_stride));
  if (t % student_stride != 0)
    throw std::invalid_argument("teacher_refine: t off the student grid");

  const NoiseSchedule& schedule = teacher.schedule();
  const int t_target = t - student_stride;
  const int t_s = select_inner_start(t, student_stride, teacher_grid.stride,
                                     config.inner_start_fraction);

  TeacherRefineResult out;
  LatentVideo x0_cur = x0_unguided;
  LatentVideo z = renoise(x0_cur, t_s, schedule, noise);
  int n = t_s;
  LatentVideo eps_at_break;  // conditional prediction at the break state

  while (true) {
    LossEval le = eval_loss(z, bundle, teacher, c, n);
    out.inner_losses.push_back(le.loss);
    if (le.loss < config.delta2) {
      out.truncated_by = Truncation::kThreshold;
      eps_at_break = le.eps_cond;
      break;
    }
    if (n == t_target) {
      out.truncated_by = Truncation::kNone;
      eps_at_break = le.eps_cond;
      break;
    }
    if (out.inner_steps >= config.n_max) {
      out.truncated_by = Truncation::kNMax;
      break;
    }

    // Guided teacher update n -> n - stride.
    LatentVideo eps_cond = le.eps_cond.size() > 0
                               ? le.eps_cond
                               : teacher.predict_epsilon(z, c, n);
    LatentVideo eps_uncond =
        teacher.predict_epsilon(z, ConditionLabel::unconditional(), n);
    LatentVideo eps_tilde =
        (1.0 + config.omega_teacher) * eps_cond -
        config.omega_teacher * eps_uncond;
    // The energy term must lower the motion loss at the predicted endpoint;
    // through x0 = (z - sqrt(1-ab) eps)/sqrt(ab) the raw gradient ascends, so
    // the descent direction enters the noise update.
    LatentVideo grad = gradient(z, eps_cond, bundle, teacher, c, n,
                                config.gradient_mode);
    ++out.grad_evals;
    x0_cur = one_step_x0(
        z, guided_epsilon(eps_tilde, LatentVideo(-grad), config.eta), n,
        schedule);
    n -= teacher_grid.stride;
    z = renoise(x0_cur, n, schedule, noise);
    ++out.inner_steps;
  }

  if (n != t_target) {
    // Truncated early: jump the current endpoint estimate to the interval end.
    z = renoise(x0_cur, t_target, schedule, noise);
    eps_at_break = LatentVideo();
  }

  // Endpoint prediction at t_target with the guided teacher noise.
  LatentVideo eps_cond = eps_at_break.size() > 0
                             ? eps_at_break
                             : teacher.predict_epsilon(z, c, t_target);
  LatentVideo eps_uncond =
      teacher.predict_epsilon(z, ConditionLabel::unconditional(), t_target);
  LatentVideo eps_tilde = (1.0 + config.omega_teacher) * eps_cond -
                          config.omega_teacher * eps_uncond;
  LatentVideo grad = gradient(z, eps_cond, bundle, teacher, c, t_target,
                              config.gradient_mode);
  ++out.grad_evals;
  out.x0_teacher = one_step_x0(
      z, guided_epsilon(eps_tilde, LatentVideo(-grad), config.eta), t_target,
      schedule);
  return out;
}

std::pair<LatentVideo, SamplerTrace> run_echo(const GuidanceConfig& config,
                                              const RunInputs& inputs,
                                              std::uint64_t seed,
                                              bool deterministic) {
  config.validate();
  const NoiseSchedule& schedule = inputs.student.schedule();
  const int total_steps = schedule.total_steps;
  const TimestepGrid& grid = inputs.student_grid;
  if (grid.stride % inputs.teacher_grid.stride != 0)
    throw std::invalid_argument(
        "run_echo: student stride must be a multiple of the teacher stride");
  if (inputs.bundle.t_alpha != config.t_alpha)
    throw std::invalid_argument(
        "run_echo: bundle t_alpha does not match the config");

  RngStream init_stream(seed, "init");
  RngStream student_stream(seed, "student");
  RngStream teacher_stream(seed, "teacher");
  GaussianSource init_noise{&init_stream, deterministic};
  GaussianSource student_noise{&student_stream, deterministic};
  GaussianSource teacher_noise{&teacher_stream, deterministic};

  SamplerTrace trace;
  trace.config = config;
  trace.seed = seed;
  trace.deterministic = deterministic;
  trace.records.reserve(grid.steps.size());

  LatentVideo z = blend_init(inputs.bundle.z_ref_T, config.k, init_noise);
  LossHistory history(config.window);

  for (int t : grid.steps) {
    StepRecord rec;
    rec.t = t;
    std::int64_t student_nfe0 = inputs.student.evals();
    std::int64_t teacher_nfe0 = inputs.teacher.evals();

    // Stage 1: student prediction, with and without motion guidance.
    CfgResult cfg = cfg_epsilon_full(inputs.student, z, inputs.condition, t,
                                     config.omega_student);
    LatentVideo x0_unguided = one_step_x0(z, cfg.eps_tilde, t, schedule);
    rec.motion_loss = motion_loss_from_eps(z, cfg.eps_cond, inputs.bundle,
                                           schedule, t);

    const bool gated = static_cast<double>(t) >
                       config.tau * static_cast<double>(total_steps);
    // The teacher emission needs a positive timestep, so the last grid step
    // cannot take the teacher branch.
    const bool teacher_eligible = gated && t > grid.stride;

    bool activate = false;
    if (teacher_eligible) {
      if (!history.empty()) rec.window_avg = history.mean();
      activate = should_activate(history, config.delta1);
    }
    rec.stage = !gated ? Stage::kNoGuidance
                       : (teacher_eligible && activate ? Stage::kTeacherGuided
                                                       : Stage::kMotionOnly);

    LatentVideo x0_new;
    if (rec.stage == Stage::kNoGuidance) {
      x0_new = x0_unguided;
    } else {
      // Descent direction into the pinned noise-update formula (see
      // teacher_refine for the endpoint-map sign).
      LatentVideo grad = gradient(z, cfg.eps_cond, inputs.bundle,
                                  inputs.student, inputs.condition, t,
                                  config.gradient_mode);
      ++rec.grad_evals;
      LatentVideo x0_guided = one_step_x0(
          z, guided_epsilon(cfg.eps_tilde, LatentVideo(-grad), config.eta), t,
          schedule);
      require_finite(x0_guided, t, rec.stage, "guided endpoint");
      if (rec.stage == Stage::kTeacherGuided) {
        TeacherRefineResult tr = teacher_refine(
            x0_unguided, t, config, inputs.teacher, inputs.bundle,
            inputs.condition, inputs.teacher_grid, grid.stride, teacher_noise);
        rec.inner_steps = tr.inner_steps;
        rec.truncated_by = tr.truncated_by;
        rec.inner_losses = std::move(tr.inner_losses);
        rec.grad_evals += tr.grad_evals;
        x0_new = interpolate_x0(x0_guided, tr.x0_teacher, config.lambda);
      } else {
        x0_new = x0_guided;
      }
    }
    require_finite(x0_new, t, rec.stage, "endpoint");

    history.push(rec.motion_loss);

    int t_next = t - grid.stride;
    z = t_next == 0 ? x0_new : renoise(x0_new, t_next, schedule, student_noise);
    require_finite(z, t, rec.stage, "latent");

    rec.student_nfe = inputs.student.evals() - student_nfe0;
    rec.teacher_nfe = inputs.teacher.evals() - teacher_nfe0;
    trace.records.push_back(std::move(rec));
  }

  trace.final_latent = z;
  return {z, std::move(trace)};
}

std::pair<LatentVideo, SamplerTrace> run_baseline(RunKind kind,
                                                  const GuidanceConfig& config,
                                                  const RunInputs& inputs,
                                                  std::uint64_t seed,
                                                  bool deterministic) {
  GuidanceConfig effective = config;
  switch (kind) {
    case RunKind::kEcho:
      break;
    case RunKind::kStudentPlain:
      effective.tau = 1.0;
      break;
    case RunKind::kStudentMotion:
      effective.delta1 = std::numeric_limits<double>::infinity();
      break;
    case RunKind::kAlwaysTeacher:
      effective.delta1 = -std::numeric_limits<double>::infinity();
      break;
  }
  auto [latent, trace] = run_echo(effective, inputs, seed, deterministic);
  trace.kind = kind;
  return {latent, std::move(trace)};
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kNoGuidance: return "NO_GUIDANCE";
    case Stage::kMotionOnly: return "MOTION_ONLY";
    case Stage::kTeacherGuided: return "TEACHER_GUIDED";
  }
  return "?";
}

const char* to_string(Truncation t) {
  switch (t) {
    case Truncation::kThreshold: return "THRESHOLD";
    case Truncation::kNMax: return "N_MAX";
    case Truncation::kNone: return "NONE";
  }
  return "?";
}

const char* to_string(RunKind k) {
  switch (k) {
    case RunKind::kEcho: return "echo";
    case RunKind::kStudentPlain: return "student_plain";
    case RunKind::kStudentMotion: return "student_motion";
    case RunKind::kAlwaysTeacher: return "always_teacher";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  if (s == "NO_GUIDANCE") return Stage::kNoGuidance;
  if (s == "MOTION_ONLY") return Stage::kMotionOnly;
  if (s == "TEACHER_GUIDED") return Stage::kTeacherGuided;
  throw std::invalid_argument("unknown stage '" + s + "'");
}

Truncation truncation_from_string(const std::string& s) {
  if (s == "THRESHOLD") return Truncation::kThreshold;
  if (s == "N_MAX") return Truncation::kNMax;
  if (s == "NONE") return Truncation::kNone;
  throw std::invalid_argument("unknown truncation '" + s + "'");
}

RunKind run_kind_from_string(const std::string& s) {
  if (s == "echo") return RunKind::kEcho;
  if (s == "student_plain") return RunKind::kStudentPlain;
  if (s == "student_motion") return RunKind::kStudentMotion;
  if (s == "always_teacher") return RunKind::kAlwaysTeacher;
  throw std::invalid_argument("unknown run kind '" + s + "'");
}

}  // namespace echo
