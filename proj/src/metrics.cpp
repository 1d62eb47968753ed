#include "echo/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace echo {

Eigen::MatrixXd motion_trajectory(const LatentVideo& video) {
  if (video.rows() < 2)
    throw std::invalid_argument("motion_trajectory: need at least 2 frames");
  return video.bottomRows(video.rows() - 1) - video.topRows(video.rows() - 1);
}

std::optional<double> motion_fidelity_toy(const LatentVideo& generated,
                                          const LatentVideo& reference) {
  if (generated.rows() != reference.rows() ||
      generated.cols() != reference.cols())
    throw std::invalid_argument("motion_fidelity_toy: shape mismatch");
  Eigen::MatrixXd dg = motion_trajectory(generated);
  Eigen::MatrixXd dr = motion_trajectory(reference);

  double sum = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < dg.rows(); ++i) {
    double ng = dg.row(i).norm();
    double nr = dr.row(i).norm();
    if (ng == 0.0 || nr == 0.0) continue;
    sum += dg.row(i).dot(dr.row(i)) / (ng * nr);
    ++used;
  }
  if (used == 0) return std::nullopt;
  return sum / used;
}

std::optional<double> temporal_consistency_toy(const LatentVideo& video) {
  if (video.rows() < 2)
    throw std::invalid_argument("temporal_consistency_toy: need >= 2 frames");
  for (Eigen::Index i = 0; i < video.rows(); ++i)
    if (video.row(i).norm() == 0.0) return std::nullopt;

  double sum = 0.0;
  for (Eigen::Index i = 0; i + 1 < video.rows(); ++i)
    sum += video.row(i).dot(video.row(i + 1)) /
           (video.row(i).norm() * video.row(i + 1).norm());
  return sum / static_cast<double>(video.rows() - 1);
}

double final_motion_loss(const LatentVideo& video,
                         const ReferenceBundle& bundle) {
  AttentionMap a = temporal_attention(video);
  return bundle.mask.cwiseProduct(bundle.a_ref - a).squaredNorm();
}

NfeReport nfe_report(const SamplerTrace& trace) {
  NfeReport r;
  for (const StepRecord& rec : trace.records) {
    r.student_nfe += rec.student_nfe;
    r.teacher_nfe += rec.teacher_nfe;
    r.gradient_evals += rec.grad_evals;
    if (rec.stage == Stage::kTeacherGuided) {
      ++r.activated_steps;
      switch (rec.truncated_by) {
        case Truncation::kThreshold: ++r.truncations_threshold; break;
        case Truncation::kNMax: ++r.truncations_nmax; break;
        case Truncation::kNone: ++r.truncations_none; break;
      }
    }
  }
  return r;
}

}  // namespace echo
