#include "cfv/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace cfv::gmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

// k-means++ seeding on (centered) rows.
Matrix kmeanspp(const Matrix& x, Index k, Rng& rng) {
  const Index n = x.rows();
  Matrix centers(k, x.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Vector d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total <= 0) {
      pick = first(rng);
    } else {
      double target = unit(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target < 0) break;
      }
    }
    centers.row(c) = x.row(pick);
    const Vector nd = (x.rowwise() - centers.row(c)).rowwise().squaredNorm();
    d2 = d2.cwiseMin(nd);
  }
  return centers;
}

// Log of pi_k N(x_i; mu_k, var_k) for all rows via two GEMMs.
Matrix weighted_log_densities(const GmmModel& m, const Matrix& x, const Matrix& x2) {
  const Matrix prec = m.variances.cwiseInverse();  // K x D
  const Matrix mp = m.means.cwiseProduct(prec);
  Vector offs(m.components());
  for (Index k = 0; k < m.components(); ++k) {
    offs(k) = std::log(m.weights(k)) -
              0.5 * (double(m.dim()) * kLog2Pi + m.variances.row(k).array().log().sum() +
                     m.means.row(k).dot(mp.row(k)));
  }
  Matrix out = x * mp.transpose();          // sum_d x mu / var
  out.noalias() -= 0.5 * (x2 * prec.transpose());  // - 1/2 sum_d x^2 / var
  out.rowwise() += offs.transpose();
  return out;
}

}  // namespace

void GmmModel::validate() const {
  require(means.rows() >= 1 && means.cols() >= 1, "GMM must have at least one component and dimension");
  require(weights.size() == means.rows(), "GMM weight count mismatch");
  require(variances.rows() == means.rows() && variances.cols() == means.cols(), "GMM variance shape mismatch");
  require(weights.allFinite() && means.allFinite() && variances.allFinite(), "GMM parameters must be finite");
  require((weights.array() >= 0).all(), "GMM weights must be non-negative");
  require(std::abs(weights.sum() - 1.0) <= 1e-10, "GMM weights must sum to 1");
  require((variances.array() > 0).all(), "GMM variances must be positive");
}

GmmFit fit_gmm(const Matrix& features, Index k, const GmmConfig& cfg) {
  const Index n = features.rows();
  const Index d = features.cols();
  require(k >= 1, "GMM needs at least one component");
  require(n >= k, "GMM needs at least as many samples as components");
  require(d >= 1, "GMM features need at least one dimension");
  require(features.allFinite(), "GMM features must be finite");
  require(cfg.var_floor > 0, "variance floor must be positive");
  require(cfg.max_iters >= 0, "max_iters must be non-negative");

  // Work in centered coordinates to limit cancellation in the GEMM form.
  const Eigen::RowVectorXd center = features.colwise().mean();
  const Matrix x = features.rowwise() - center;
  const Matrix x2 = x.cwiseAbs2();
  const Eigen::RowVectorXd global_var =
      (x2.colwise().mean()).cwiseMax(cfg.var_floor);

  Rng rng(cfg.seed);
  GmmFit fit;
  GmmModel& m = fit.model;
  m.means = kmeanspp(x, k, rng);
  m.variances = global_var.replicate(k, 1);
  m.weights = Vector::Constant(k, 1.0 / double(k));

  Matrix resp(n, k);
  auto e_step = [&]() {
    resp = weighted_log_densities(m, x, x2);
    Vector row_ll(n);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
      const double lse = log_sum_exp(resp.row(i).transpose());
      row_ll(i) = lse;
      resp.row(i) = (resp.row(i).array() - lse).exp();
    }
    double total = 0.0;  // fixed order
    for (Index i = 0; i < n; ++i) total += row_ll(i);
    return total / double(n);
  };

  for (int it = 0; it < cfg.max_iters; ++it) {
    const double ll = e_step();
    fit.log_likelihood.push_back(ll);
    if (it > 0) {
      const double prev = fit.log_likelihood[fit.log_likelihood.size() - 2];
      if (ll - prev < cfg.tol * std::max(1.0, std::abs(prev))) break;
    }

    // M-step.
    const Vector nk = resp.colwise().sum().transpose();
    Matrix sx = resp.transpose() * x;    // K x D
    Matrix sx2 = resp.transpose() * x2;  // K x D
    for (Index c = 0; c < k; ++c) {
      if (nk(c) <= 1e-10 * double(n)) {
        // Revive an empty component at the worst-covered sample.
        Index far = 0;
        double best = -1.0;
        for (Index i = 0; i < n; ++i) {
          const double dist = (m.means.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff();
          if (dist > best) {
            best = dist;
            far = i;
          }
        }
        m.means.row(c) = x.row(far);
        m.variances.row(c) = global_var;
        m.weights(c) = 1.0 / double(n);
        ++fit.reseeded;
        continue;
      }
      m.means.row(c) = sx.row(c) / nk(c);
      m.variances.row(c) =
          (sx2.row(c) / nk(c) - m.means.row(c).cwiseAbs2()).cwiseMax(cfg.var_floor);
      m.weights(c) = nk(c) / double(n);
    }
    m.weights /= m.weights.sum();
    ++fit.iterations;
  }
  if (fit.log_likelihood.empty() || fit.iterations == cfg.max_iters) fit.log_likelihood.push_back(e_step());

  m.means.rowwise() += center;
  return fit;
}

Vector component_log_densities(const GmmModel& m, const Eigen::Ref<const Vector>& x) {
  require(x.size() == m.dim(), "GMM dimension mismatch");
  Vector out(m.components());
  for (Index k = 0; k < m.components(); ++k) {
    double s = 0.0;
    for (Index j = 0; j < m.dim(); ++j) {
      const double diff = x(j) - m.means(k, j);
      s += std::log(m.variances(k, j)) + diff * diff / m.variances(k, j);
    }
    out(k) = -0.5 * (double(m.dim()) * kLog2Pi + s);
  }
  return out;
}

Vector responsibilities(const GmmModel& m, const Eigen::Ref<const Vector>& x) {
  Vector lp = component_log_densities(m, x);
  for (Index k = 0; k < lp.size(); ++k)
    lp(k) += m.weights(k) > 0 ? std::log(m.weights(k)) : -std::numeric_limits<double>::infinity();
  const double lse = log_sum_exp(lp);
  Vector g = (lp.array() - lse).exp();
  return g / g.sum();
}

double log_likelihood(const GmmModel& m, const Eigen::Ref<const Vector>& x) {
  Vector lp = component_log_densities(m, x);
  for (Index k = 0; k < lp.size(); ++k)
    lp(k) += m.weights(k) > 0 ? std::log(m.weights(k)) : -std::numeric_limits<double>::infinity();
  return log_sum_exp(lp);
}

Matrix responsibilities_rows(const GmmModel& m, const Matrix& rows) {
  require(rows.cols() == m.dim(), "GMM dimension mismatch");
  Matrix out(rows.rows(), m.components());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows.rows(); ++i) out.row(i) = responsibilities(m, Vector(rows.row(i).transpose())).transpose();
  return out;
}

double nearest_prototype_distance(const GmmModel& m, const Eigen::Ref<const Vector>& x) {
  require(x.size() == m.dim(), "GMM dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < m.components(); ++k) best = std::min(best, (m.means.row(k).transpose() - x).squaredNorm());
  return std::sqrt(best);
}

}  // namespace cfv::gmm
