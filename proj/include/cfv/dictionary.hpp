#pragma once

#include "cfv/common.hpp"

namespace cfv {

/// D x M basis matrix whose columns all have unit l2 norm.
class Dictionary {
public:
  Dictionary() = default;

  /// Takes bases that are already unit norm; throws ArgumentError if any
  /// column is off by more than `tol` or any entry is non-finite.
  explicit Dictionary(Matrix bases, double tol = 1e-6);

  /// Scales every column to unit norm. Zero columns are rejected.
  static Dictionary normalized(Matrix bases);

  const Matrix& bases() const { return bases_; }
  Index dim() const { return bases_.rows(); }
  Index size() const { return bases_.cols(); }
  auto column(Index j) const { return bases_.col(j); }

private:
  Matrix bases_;
};

}  // namespace cfv
