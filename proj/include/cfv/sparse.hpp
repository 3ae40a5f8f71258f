#pragma once

#include "cfv/common.hpp"
#include "cfv/dictionary.hpp"

#include <vector>

namespace cfv::sparse {

struct SparseCode {
  Vector values;               // zero outside `support`
  std::vector<Index> support;  // ascending

  Index nnz() const { return Index(support.size()); }
};

struct MpResult {
  SparseCode code;
  Vector residual;  // x - B u, tracked incrementally
};

struct HybridCode {
  SparseCode d;     // coefficients on B_d
  SparseCode r;     // coefficients on B_r
  Vector residual;  // x - B_d u_d - B_r u_r
};

struct MpConfig {
  int k = 10;            // SCFVC sparsity
  int k1 = 10;           // HSCFVC budget on u_d
  int k2 = 10;           // HSCFVC budget on u_r
  double lambda = 0.5;   // weight of |u_d - c|^2
  double sigma2 = 1.0;   // Gaussian noise variance; scales the Fisher blocks

  void validate() const;
};

/// Greedy matching pursuit with `k` iterations. Each step adds the single
/// coordinate update that most reduces |r|^2; for unit-norm atoms the optimal
/// increment is r^T b_j. A step with no strictly positive gain is skipped, so
/// the residual norm never increases. Re-selecting an atom accumulates.
MpResult mp_encode(const Dictionary& bases, const Eigen::Ref<const Vector>& x, int k);

/// Two-phase pursuit for
///   min |x - B_d u_d - B_r u_r|^2 + lambda |u_d - c|^2, |u_d|_0 <= k1, |u_r|_0 <= k2.
/// Phase one spends k1 steps on u_d, choosing per candidate j the increment
///   (r^T b_j + lambda (c_j - u_j)) / (1 + lambda)
/// and taking the candidate with the largest objective decrease. Phase two is
/// plain matching pursuit on B_r from the phase-one residual.
HybridCode hybrid_mp_encode(const Dictionary& bases_d, const Dictionary& bases_r,
                            const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& c,
                            const MpConfig& cfg);

/// (1/sigma2) |x - B u|^2 + lambda_l1 |u|_1
double objective_I(const Matrix& bases, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                   double lambda_l1, double sigma2 = 1.0);

/// (1/sigma2) |x - B_d u_d - B_r u_r|^2 + lambda |u_d - c|^2. Sparsity budgets
/// are the caller's concern.
double objective_II(const Matrix& bases_d, const Matrix& bases_r, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& u_d, const Eigen::Ref<const Vector>& u_r,
                    const Eigen::Ref<const Vector>& c, double lambda, double sigma2 = 1.0);

/// Batch helpers: one pursuit per row of `rows`, parallel over rows. Codes are
/// returned densely (N x M); residuals (N x D) when requested.
Matrix mp_encode_rows(const Dictionary& bases, const Matrix& rows, int k, Matrix* residuals = nullptr);
void hybrid_mp_encode_rows(const Dictionary& bases_d, const Dictionary& bases_r, const Matrix& rows,
                           const Matrix& guidance, const MpConfig& cfg, Matrix& codes_d, Matrix& codes_r,
                           Matrix* residuals = nullptr);

}  // namespace cfv::sparse
