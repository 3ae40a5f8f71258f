#pragma once

#include "cfv/common.hpp"

#include <cstdint>
#include <vector>

namespace cfv::gmm {

/// K weighted diagonal Gaussians.
struct GmmModel {
  Vector weights;    // K, sums to 1
  Matrix means;      // K x D
  Matrix variances;  // K x D, every entry >= the fit's variance floor

  Index components() const { return means.rows(); }
  Index dim() const { return means.cols(); }

  void validate() const;
};

struct GmmConfig {
  int max_iters = 100;
  double tol = 1e-6;  // stop when the relative log-likelihood gain drops below this
  std::uint64_t seed = 0;
  double var_floor = 1e-6;
};

struct GmmFit {
  GmmModel model;
  /// Mean per-sample log-likelihood before each M-step and once for the
  /// returned model (last entry).
  std::vector<double> log_likelihood;
  int iterations = 0;
  int reseeded = 0;  // components revived after going empty
};

/// EM from a k-means++ start. A component whose total responsibility
/// vanishes is re-seeded at the sample farthest from every current mean.
GmmFit fit_gmm(const Matrix& features, Index k, const GmmConfig& cfg = {});

/// log N(x; mu_k, diag(var_k)) for every k.
Vector component_log_densities(const GmmModel& m, const Eigen::Ref<const Vector>& x);

/// Posterior P(k | x), computed in log space.
Vector responsibilities(const GmmModel& m, const Eigen::Ref<const Vector>& x);

/// log sum_k pi_k N(x; mu_k, var_k).
double log_likelihood(const GmmModel& m, const Eigen::Ref<const Vector>& x);

/// Row-wise responsibilities for a whole N x D block (N x K). Parallel over
/// rows; each row is identical to `responsibilities`.
Matrix responsibilities_rows(const GmmModel& m, const Matrix& rows);

/// min_k |x - mu_k|_2.
double nearest_prototype_distance(const GmmModel& m, const Eigen::Ref<const Vector>& x);

}  // namespace cfv::gmm
