#pragma once

#include <Eigen/Dense>

namespace echo {

// A latent video is a dense frames x dim matrix; row f is the latent of frame f.
using LatentVideo = Eigen::MatrixXd;

// Frame-to-frame affinity matrix, row-stochastic.
using AttentionMap = Eigen::MatrixXd;

// Binary frames x frames mask (entries 0 or 1).
using TemporalMask = Eigen::MatrixXd;

inline bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace echo
