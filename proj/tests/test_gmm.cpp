#include "cfv/gmm.hpp"
#include "cfv/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cstring>

using namespace cfv;
using namespace cfv::gmm;

namespace {

GmmModel random_model(Index k, Index d, std::uint64_t seed) {
  GmmModel m;
  m.means = test::random_matrix(k, d, seed, 2.0);
  m.variances = (test::random_matrix(k, d, seed + 1).array().abs() + 0.2).matrix();
  m.weights = (test::random_vector(k, seed + 2).array().abs() + 0.1).matrix();
  m.weights /= m.weights.sum();
  return m;
}

// Posterior by direct density evaluation in extended precision.
std::vector<long double> oracle_posterior(const GmmModel& m, const Vector& x) {
  std::vector<long double> p(std::size_t(m.components()));
  long double z = 0;
  for (Index k = 0; k < m.components(); ++k) {
    long double e = 0, logdet = 0;
    for (Index j = 0; j < m.dim(); ++j) {
      const long double diff = (long double)x(j) - m.means(k, j);
      e += diff * diff / m.variances(k, j);
      logdet += std::log((long double)m.variances(k, j));
    }
    p[std::size_t(k)] = m.weights(k) * std::exp(-0.5L * (e + logdet));
    z += p[std::size_t(k)];
  }
  for (auto& v : p) v /= z;
  return p;
}

Matrix two_clusters(std::uint64_t seed) {
  Matrix x = test::random_matrix(400, 2, seed, 0.3);
  for (Index i = 0; i < 200; ++i) x(i, 0) += 5.0;
  for (Index i = 200; i < 400; ++i) x(i, 0) -= 5.0;
  return x;
}

}  // namespace

TEST_CASE("K = 1 equals the sample mean and ML variance") {
  const Matrix x = test::random_matrix(100, 4, 1) * test::random_matrix(4, 4, 2);
  const GmmFit fit = fit_gmm(x, 1);
  const Vector mean = x.colwise().mean();
  const Vector var = (x.rowwise() - mean.transpose()).cwiseAbs2().colwise().mean();
  CHECK((fit.model.means.row(0).transpose() - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fit.model.variances.row(0).transpose() - var).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.model.weights(0) == 1.0);
}

TEST_CASE("two separated clusters are recovered") {
  const GmmFit fit = fit_gmm(two_clusters(3), 2);
  const GmmModel& m = fit.model;
  const Index pos = m.means(0, 0) > 0 ? 0 : 1;
  CHECK(std::abs(m.means(pos, 0) - 5.0) < 0.05);
  CHECK(std::abs(m.means(1 - pos, 0) + 5.0) < 0.05);
  const Matrix g = responsibilities_rows(m, two_clusters(3));
  for (Index i = 0; i < 200; ++i) CHECK(g(i, pos) >= 0.99);
  for (Index i = 200; i < 400; ++i) CHECK(g(i, 1 - pos) >= 0.99);
}

TEST_CASE("EM log-likelihood is non-decreasing") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    synth::GenModelI gen{synth::random_unit_bases(6, 10, seed), 1.0, 0.1, 2};
    const Matrix x = synth::sample_features_I(gen, 300, seed);
    GmmConfig cfg;
    cfg.seed = seed;
    cfg.tol = 0.0;
    cfg.max_iters = 40;
    const GmmFit fit = fit_gmm(x, 5, cfg);
    for (std::size_t t = 1; t < fit.log_likelihood.size(); ++t)
      CHECK(fit.log_likelihood[t] >= fit.log_likelihood[t - 1] - 1e-9);
    fit.model.validate();
  }
}

TEST_CASE("responsibilities match the extended-precision oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GmmModel m = random_model(6, 5, seed * 3);
    const Vector x = test::random_vector(5, seed + 100, 1.5);
    const Vector g = responsibilities(m, x);
    const auto o = oracle_posterior(m, x);
    for (Index k = 0; k < 6; ++k) CHECK(std::abs(g(k) - double(o[std::size_t(k)])) < 1e-10);
    CHECK(std::abs(g.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("responsibility special cases") {
  GmmModel m = random_model(3, 4, 7);
  m.means.row(1) = m.means.row(0).array() + 50.0;
  m.means.row(2) = m.means.row(0).array() - 50.0;
  m.variances.setOnes();
  const Vector g = responsibilities(m, m.means.row(1).transpose());
  CHECK(g(1) > 1.0 - 1e-12);

  GmmModel same = m;
  for (Index k = 1; k < 3; ++k) {
    same.means.row(k) = same.means.row(0);
    same.variances.row(k) = same.variances.row(0);
  }
  const Vector h = responsibilities(same, test::random_vector(4, 1));
  for (Index k = 0; k < 3; ++k) CHECK(std::abs(h(k) - same.weights(k)) < 1e-14);
}

TEST_CASE("nearest prototype distance") {
  const GmmModel m = random_model(5, 3, 9);
  CHECK(nearest_prototype_distance(m, m.means.row(2).transpose()) == 0.0);

  GmmModel one;
  one.means = Matrix::Zero(1, 2);
  one.variances = Matrix::Ones(1, 2);
  one.weights = Vector::Ones(1);
  Vector x(2);
  x << 3.0, 4.0;
  CHECK(nearest_prototype_distance(one, x) == doctest::Approx(5.0).epsilon(1e-15));

  for (std::uint64_t s = 0; s < 10; ++s) {
    const Vector y = test::random_vector(3, s + 40, 3.0);
    double best = 1e300;
    for (Index k = 0; k < 5; ++k) {
      double d2 = 0;
      for (Index j = 0; j < 3; ++j) d2 += (y(j) - m.means(k, j)) * (y(j) - m.means(k, j));
      best = std::min(best, d2);
    }
    CHECK(std::abs(nearest_prototype_distance(m, y) - std::sqrt(best)) < 1e-12);
  }
}

TEST_CASE("fit errors and determinism") {
  CHECK_THROWS_AS(fit_gmm(test::random_matrix(3, 2, 1), 4), ArgumentError);
  CHECK_THROWS_AS(fit_gmm(test::random_matrix(3, 2, 1), 0), ArgumentError);
  Matrix bad = test::random_matrix(5, 2, 1);
  bad(2, 1) = std::nan("");
  CHECK_THROWS_AS(fit_gmm(bad, 2), ArgumentError);

  const Matrix x = test::random_matrix(200, 3, 5);
  GmmConfig cfg;
  cfg.seed = 4;
  set_num_threads(1);
  const GmmFit a = fit_gmm(x, 4, cfg);
  set_num_threads(3);
  const GmmFit b = fit_gmm(x, 4, cfg);
  set_num_threads(0);
  CHECK(std::memcmp(a.model.means.data(), b.model.means.data(), sizeof(double) * 12) == 0);
  CHECK(a.log_likelihood == b.log_likelihood);
}

TEST_CASE("variance floor holds") {
  Matrix x = test::random_matrix(50, 2, 5);
  x.col(1).setConstant(3.0);
  GmmConfig cfg;
  cfg.var_floor = 1e-4;
  const GmmFit fit = fit_gmm(x, 3, cfg);
  CHECK((fit.model.variances.array() >= 1e-4).all());
}
