#pragma once

#include <cstdint>
#include <Eigen/Dense>

namespace defproj {

// Diagnostics for how directionally uniform an embedding matrix is.
struct GeometryReport {
  double mean_pairwise_cosine = 0.0;
  double covariance_condition_number = 1.0;
  double top2_variance_ratio = 0.0;
  bool is_centered = false;
};

struct IcaConfig {
  int max_iterations = 1000;
  std::uint64_t random_state = 42;
  double rescale_factor = 100.0;
  double convergence_tolerance = 1e-6;
};

struct IcaResult {
  Eigen::MatrixXd transformed;  // n x d, unit-variance sources * rescale
  bool converged = false;
  int iterations = 0;
};

enum class ProjectionMode { SvdRaw, PcaWhitened };

// Rows are samples throughout. All of these are pure functions.

Eigen::MatrixXd center(const Eigen::MatrixXd& x);

// SvdRaw: project the matrix as-is onto its two leading right singular
// vectors. PcaWhitened: center, project onto the two leading principal axes,
// and scale each coordinate to unit sample variance.
Eigen::MatrixXd top2_projection(const Eigen::MatrixXd& x, ProjectionMode mode);

// Zero-phase whitening: output sample covariance is the identity. Directions
// with eigenvalue at or below the ridge guard are treated as degenerate.
Eigen::MatrixXd whiten(const Eigen::MatrixXd& x);

// Whiten, then symmetric fixed-point ICA with the logcosh contrast.
// Components are ordered by excess kurtosis (descending), sign-fixed so each
// column's largest-magnitude value is positive, and multiplied by the
// rescale factor. Non-convergence returns the best iterate with
// converged=false rather than failing.
IcaResult ica_transform(const Eigen::MatrixXd& x, const IcaConfig& config);

GeometryReport anisotropy_report(const Eigen::MatrixXd& x,
                                 std::uint64_t sample_seed = 1234567);

}  // namespace defproj
