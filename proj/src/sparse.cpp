#include "cfv/sparse.hpp"

namespace cfv::sparse {

namespace {

SparseCode make_code(Vector values) {
  SparseCode c;
  for (Index j = 0; j < values.size(); ++j)
    if (values(j) != 0.0) c.support.push_back(j);
  c.values = std::move(values);
  return c;
}

// Plain pursuit on `r`, accumulating into `u`. Shared by mp_encode and the
// second phase of the hybrid pursuit so the two agree bit for bit.
void residual_pursuit(const Matrix& b, Vector& r, Vector& u, int steps) {
  for (int t = 0; t < steps; ++t) {
    const Vector corr = b.transpose() * r;
    Index best = -1;
    double best_gain = 0.0;
    for (Index j = 0; j < corr.size(); ++j) {
      const double gain = corr(j) * corr(j);
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    if (best < 0) break;  // zero update wins; later steps would see the same residual
    const double step = corr(best);
    u(best) += step;
    r.noalias() -= step * b.col(best);
  }
}

void check_x(const Dictionary& b, const Eigen::Ref<const Vector>& x) {
  require(x.size() == b.dim(), "feature dimension " + std::to_string(x.size()) + " does not match dictionary rows " +
                                   std::to_string(b.dim()));
}

}  // namespace

void MpConfig::validate() const {
  require(k >= 0 && k1 >= 0 && k2 >= 0, "sparsity budgets must be non-negative");
  require(lambda >= 0, "lambda must be non-negative");
  require(sigma2 > 0, "sigma2 must be positive");
}

MpResult mp_encode(const Dictionary& bases, const Eigen::Ref<const Vector>& x, int k) {
  check_x(bases, x);
  require(k >= 0, "sparsity must be non-negative");
  require(k <= bases.size(), "sparsity exceeds dictionary size");
  MpResult out;
  out.residual = x;
  Vector u = Vector::Zero(bases.size());
  residual_pursuit(bases.bases(), out.residual, u, k);
  out.code = make_code(std::move(u));
  return out;
}

HybridCode hybrid_mp_encode(const Dictionary& bases_d, const Dictionary& bases_r, const Eigen::Ref<const Vector>& x,
                            const Eigen::Ref<const Vector>& c, const MpConfig& cfg) {
  cfg.validate();
  check_x(bases_d, x);
  check_x(bases_r, x);
  require(c.size() == bases_d.size(), "guidance code length must equal the B_d basis count");
  require(c.allFinite(), "guidance code must be finite");
  require(cfg.k1 <= bases_d.size() && cfg.k2 <= bases_r.size(), "sparsity budget exceeds basis count");

  const Matrix& bd = bases_d.bases();
  const double lam = cfg.lambda;
  const double denom = 1.0 + lam;  // b_j^T b_j + lambda with unit atoms

  Vector r = x;
  Vector ud = Vector::Zero(bd.cols());
  for (int t = 0; t < cfg.k1; ++t) {
    const Vector corr = bd.transpose() * r;
    Index best = -1;
    double best_gain = 0.0, best_num = 0.0;
    for (Index j = 0; j < corr.size(); ++j) {
      // Objective decrease for the optimal increment is num^2 / denom.
      const double num = corr(j) + lam * (c(j) - ud(j));
      const double gain = num * num / denom;
      if (gain > best_gain) {
        best_gain = gain;
        best_num = num;
        best = j;
      }
    }
    if (best < 0) break;
    const double step = best_num / denom;
    ud(best) += step;
    r.noalias() -= step * bd.col(best);
  }

  Vector ur = Vector::Zero(bases_r.size());
  residual_pursuit(bases_r.bases(), r, ur, cfg.k2);

  HybridCode out;
  out.d = make_code(std::move(ud));
  out.r = make_code(std::move(ur));
  out.residual = std::move(r);
  return out;
}

double objective_I(const Matrix& bases, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u,
                   double lambda_l1, double sigma2) {
  require(bases.rows() == x.size() && bases.cols() == u.size(), "objective_I dimension mismatch");
  require(sigma2 > 0, "sigma2 must be positive");
  return (x - bases * u).squaredNorm() / sigma2 + lambda_l1 * u.lpNorm<1>();
}

double objective_II(const Matrix& bases_d, const Matrix& bases_r, const Eigen::Ref<const Vector>& x,
                    const Eigen::Ref<const Vector>& u_d, const Eigen::Ref<const Vector>& u_r,
                    const Eigen::Ref<const Vector>& c, double lambda, double sigma2) {
  require(bases_d.rows() == x.size() && bases_r.rows() == x.size(), "objective_II row mismatch");
  require(bases_d.cols() == u_d.size() && bases_r.cols() == u_r.size() && c.size() == u_d.size(),
          "objective_II code length mismatch");
  require(sigma2 > 0, "sigma2 must be positive");
  return (x - bases_d * u_d - bases_r * u_r).squaredNorm() / sigma2 + lambda * (u_d - c).squaredNorm();
}

Matrix mp_encode_rows(const Dictionary& bases, const Matrix& rows, int k, Matrix* residuals) {
  require(rows.cols() == bases.dim(), "feature dimension does not match dictionary rows");
  Matrix codes(rows.rows(), bases.size());
  if (residuals) residuals->resize(rows.rows(), rows.cols());
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < rows.rows(); ++i) {
    auto res = mp_encode(bases, rows.row(i).transpose(), k);
    codes.row(i) = res.code.values.transpose();
    if (residuals) residuals->row(i) = res.residual.transpose();
  }
  return codes;
}

void hybrid_mp_encode_rows(const Dictionary& bases_d, const Dictionary& bases_r, const Matrix& rows,
                           const Matrix& guidance, const MpConfig& cfg, Matrix& codes_d, Matrix& codes_r,
                           Matrix* residuals) {
  require(rows.cols() == bases_d.dim(), "feature dimension does not match dictionary rows");
  require(guidance.rows() == rows.rows() && guidance.cols() == bases_d.size(),
          "guidance codes must be N x M1 and aligned with the feature rows");
  codes_d.resize(rows.rows(), bases_d.size());
  codes_r.resize(rows.rows(), bases_r.size());
  if (residuals) residuals->resize(rows.rows(), rows.cols());
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < rows.rows(); ++i) {
    auto h = hybrid_mp_encode(bases_d, bases_r, rows.row(i).transpose(), guidance.row(i).transpose(), cfg);
    codes_d.row(i) = h.d.values.transpose();
    codes_r.row(i) = h.r.values.transpose();
    if (residuals) residuals->row(i) = h.residual.transpose();
  }
}

}  // namespace cfv::sparse
