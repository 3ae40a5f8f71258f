#include "cfv/dict_learn.hpp"

#include <algorithm>
#include <numeric>

namespace cfv::dict {

namespace {

// Row indices in seeded random order, zero rows dropped.
std::vector<Index> shuffled_nonzero_rows(const Matrix& x, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::erase_if(idx, [&](Index i) { return x.row(i).squaredNorm() == 0.0; });
  return idx;
}

Matrix rows_as_columns(const Matrix& x, const std::vector<Index>& idx, std::size_t from, Index count) {
  Matrix b(x.cols(), count);
  for (Index j = 0; j < count; ++j) b.col(j) = x.row(idx[from + std::size_t(j)]).transpose().normalized();
  return b;
}

// Least-squares update of the concatenated bases given concatenated codes
// (N x M). Only atoms with at least one nonzero code enter the solve; the rest
// are reported through `dead` and left untouched.
Matrix solve_bases(const Matrix& x, const Matrix& codes, const Matrix& current, double ridge,
                   std::vector<Index>& dead) {
  dead.clear();
  std::vector<Index> used;
  for (Index j = 0; j < codes.cols(); ++j) {
    if (codes.col(j).cwiseAbs().maxCoeff() > 0.0)
      used.push_back(j);
    else
      dead.push_back(j);
  }
  Matrix out = current;
  if (used.empty()) return out;
  Matrix a(codes.rows(), Index(used.size()));
  for (std::size_t j = 0; j < used.size(); ++j) a.col(Index(j)) = codes.col(used[j]);
  Matrix gram = a.transpose() * a;
  gram.diagonal().array() += ridge;
  const Matrix bt = gram.ldlt().solve(a.transpose() * x);  // used x D
  for (std::size_t j = 0; j < used.size(); ++j) out.col(used[j]) = bt.row(Index(j)).transpose();
  return out;
}

// Replaces `dead` columns of `bases` with the normalized rows of `x` that
// have the largest residual norm, one distinct row per dead atom.
int replace_dead(Matrix& bases, const std::vector<Index>& dead, const Matrix& x, const Matrix& residuals) {
  if (dead.empty()) return 0;
  const Vector err = residuals.rowwise().squaredNorm();
  std::vector<Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return err(a) > err(b); });
  std::size_t next = 0;
  int replaced = 0;
  for (Index j : dead) {
    while (next < order.size() && x.row(order[next]).squaredNorm() == 0.0) ++next;
    if (next >= order.size()) break;
    bases.col(j) = x.row(order[next++]).transpose().normalized();
    ++replaced;
  }
  return replaced;
}

// Unit-normalizes every column; zero columns are reported as dead.
void renormalize(Matrix& bases, std::vector<Index>& dead) {
  for (Index j = 0; j < bases.cols(); ++j) {
    const double n = bases.col(j).norm();
    if (n > 0.0 && std::isfinite(n))
      bases.col(j) /= n;
    else if (std::find(dead.begin(), dead.end(), j) == dead.end())
      dead.push_back(j);
  }
}

}  // namespace

double mean_reconstruction_error(const Matrix& features, const Matrix& bases, const Matrix& codes) {
  require(features.rows() == codes.rows() && bases.cols() == codes.cols() && bases.rows() == features.cols(),
          "reconstruction error shape mismatch");
  if (features.rows() == 0) return 0.0;
  return (features - codes * bases.transpose()).rowwise().squaredNorm().mean();
}

DictLearnResult learn_dictionary(const Matrix& features, Index m, const DictLearnConfig& cfg) {
  require(m >= 1, "dictionary needs at least one atom");
  require(features.rows() >= m, "dictionary learning needs at least m feature rows");
  require(features.allFinite(), "features must be finite");
  require(cfg.k >= 0 && cfg.k <= m, "sparsity must lie in [0, m]");
  require(cfg.iters >= 0, "iteration count must be non-negative");

  const auto rows = shuffled_nonzero_rows(features, cfg.seed);
  require(Index(rows.size()) >= m, "not enough nonzero feature rows to initialise the dictionary");
  Matrix b = rows_as_columns(features, rows, 0, m);

  DictLearnResult out;
  Matrix residuals;
  std::vector<Index> dead;
  for (int it = 0; it < cfg.iters; ++it) {
    const Dictionary current(b, 1e-9);
    const Matrix codes = sparse::mp_encode_rows(current, features, cfg.k);
    out.coded_error.push_back(mean_reconstruction_error(features, b, codes));

    b = solve_bases(features, codes, b, cfg.ridge, dead);
    residuals = features - codes * b.transpose();
    out.updated_error.push_back(residuals.rowwise().squaredNorm().mean());

    renormalize(b, dead);
    out.replaced_atoms += replace_dead(b, dead, features, residuals);
  }
  out.dictionary = Dictionary(std::move(b), 1e-9);
  const Matrix codes = sparse::mp_encode_rows(out.dictionary, features, cfg.k);
  out.coded_error.push_back(mean_reconstruction_error(features, out.dictionary.bases(), codes));
  return out;
}

HybridLearnResult learn_hybrid_dictionaries(const Matrix& features, const Matrix& guidance, Index m1, Index m2,
                                            const HybridLearnConfig& cfg) {
  require(m1 >= 0 && m2 >= 0 && m1 + m2 >= 1, "need at least one atom across B_d and B_r");
  require(features.rows() >= m1 + m2, "dictionary learning needs at least m1 + m2 feature rows");
  require(features.allFinite(), "features must be finite");
  require(guidance.rows() == features.rows() && guidance.cols() == m1,
          "guidance codes must be N x m1 and aligned with the feature rows");
  require(cfg.k1 >= 0 && cfg.k1 <= m1 && cfg.k2 >= 0 && cfg.k2 <= m2, "sparsity budgets must fit the basis counts");
  require(cfg.iters >= 0, "iteration count must be non-negative");

  sparse::MpConfig mp;
  mp.k1 = cfg.k1;
  mp.k2 = cfg.k2;
  mp.lambda = cfg.lambda;
  mp.validate();

  const auto rows = shuffled_nonzero_rows(features, cfg.seed);
  require(Index(rows.size()) >= m1 + m2, "not enough nonzero feature rows to initialise the dictionaries");
  Matrix bd = rows_as_columns(features, rows, 0, m1);
  Matrix br = rows_as_columns(features, rows, std::size_t(m1), m2);

  HybridLearnResult out;
  Matrix cd, cr, residuals, joint_codes(features.rows(), m1 + m2), joint_bases(features.cols(), m1 + m2);
  std::vector<Index> dead;

  auto code_pass = [&](const Matrix& d_bases, const Matrix& r_bases) {
    const Dictionary dd(d_bases, 1e-9), dr(r_bases, 1e-9);
    sparse::hybrid_mp_encode_rows(dd, dr, features, guidance, mp, cd, cr);
    const double rec = (features - cd * d_bases.transpose() - cr * r_bases.transpose()).rowwise().squaredNorm().mean();
    const double fid = m1 > 0 ? (cd - guidance).rowwise().squaredNorm().mean() : 0.0;
    out.coded_error.push_back(rec);
    out.coded_objective.push_back(rec + cfg.lambda * fid);
    return fid;
  };

  for (int it = 0; it < cfg.iters; ++it) {
    const double fid = code_pass(bd, br);

    joint_codes.leftCols(m1) = cd;
    joint_codes.rightCols(m2) = cr;
    joint_bases.leftCols(m1) = bd;
    joint_bases.rightCols(m2) = br;
    joint_bases = solve_bases(features, joint_codes, joint_bases, cfg.ridge, dead);
    residuals = features - joint_codes * joint_bases.transpose();
    out.updated_objective.push_back(residuals.rowwise().squaredNorm().mean() + cfg.lambda * fid);

    renormalize(joint_bases, dead);
    out.replaced_atoms += replace_dead(joint_bases, dead, features, residuals);
    bd = joint_bases.leftCols(m1);
    br = joint_bases.rightCols(m2);
  }
  code_pass(bd, br);
  out.bases_d = Dictionary(std::move(bd), 1e-9);
  out.bases_r = Dictionary(std::move(br), 1e-9);
  return out;
}

}  // namespace cfv::dict
