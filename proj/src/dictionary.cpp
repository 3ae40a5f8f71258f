#include "cfv/dictionary.hpp"

#include <cmath>

namespace cfv {

Dictionary::Dictionary(Matrix bases, double tol) : bases_(std::move(bases)) {
  require(bases_.rows() >= 1, "dictionary needs at least one row");
  require(bases_.allFinite(), "dictionary entries must be finite");
  for (Index j = 0; j < bases_.cols(); ++j) {
    const double n = bases_.col(j).norm();
    require(std::abs(n - 1.0) <= tol,
            "dictionary column " + std::to_string(j) + " has norm " + std::to_string(n) + ", expected 1");
  }
}

Dictionary Dictionary::normalized(Matrix bases) {
  for (Index j = 0; j < bases.cols(); ++j) {
    const double n = bases.col(j).norm();
    require(n > 0 && std::isfinite(n), "cannot normalize zero or non-finite column " + std::to_string(j));
    bases.col(j) /= n;
  }
  return Dictionary(std::move(bases), 1e-10);
}

}  // namespace cfv
