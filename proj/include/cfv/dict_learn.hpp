#pragma once

#include "cfv/common.hpp"
#include "cfv/dictionary.hpp"
#include "cfv/sparse.hpp"

#include <cstdint>
#include <vector>

namespace cfv::dict {

struct DictLearnConfig {
  int k = 5;       // matching-pursuit sparsity during training
  int iters = 20;  // outer alternations
  std::uint64_t seed = 0;
  double ridge = 1e-8;  // added to the code Gram matrix in the basis update
};

struct DictLearnResult {
  Dictionary dictionary;
  /// coded_error[t]: mean |x - B_t u|^2 right after inference with B_t.
  /// Has iters + 1 entries; the last one belongs to the returned dictionary.
  std::vector<double> coded_error;
  /// updated_error[t]: same codes, least-squares bases, before renormalizing.
  std::vector<double> updated_error;
  int replaced_atoms = 0;
};

/// Alternating minimisation: matching-pursuit codes with B fixed, then the
/// ridge least-squares (MOD) basis update with codes fixed, then column
/// renormalisation. Atoms no feature used during an iteration are replaced by
/// the worst-reconstructed features. Initialised from m distinct random rows.
DictLearnResult learn_dictionary(const Matrix& features, Index m, const DictLearnConfig& cfg = {});

struct HybridLearnConfig {
  int k1 = 10;
  int k2 = 10;
  double lambda = 0.5;
  int iters = 20;
  std::uint64_t seed = 0;
  double ridge = 1e-8;
};

struct HybridLearnResult {
  Dictionary bases_d;
  Dictionary bases_r;
  /// Mean hybrid objective |x - B_d u_d - B_r u_r|^2 + lambda |u_d - c|^2.
  std::vector<double> coded_objective;    // iters + 1 entries
  std::vector<double> updated_objective;  // iters entries, pre-renormalisation
  std::vector<double> coded_error;        // reconstruction part only
  int replaced_atoms = 0;
};

/// Same scheme for the (B_d, B_r) pair: hybrid pursuit guided by the per-row
/// codes in `guidance` (N x m1), then a joint least-squares update of the
/// concatenated bases [B_d B_r].
HybridLearnResult learn_hybrid_dictionaries(const Matrix& features, const Matrix& guidance, Index m1, Index m2,
                                            const HybridLearnConfig& cfg = {});

/// Mean over rows of |x_i - B u_i|^2 for dense codes (N x M).
double mean_reconstruction_error(const Matrix& features, const Matrix& bases, const Matrix& codes);

}  // namespace cfv::dict
