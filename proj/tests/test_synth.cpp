#include "cfv/synth.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cstring>

using namespace cfv;
using namespace cfv::synth;

TEST_CASE("laplace inverse cdf") {
  CHECK(laplace_from_uniform(0.0, 1.0) == 0.0);
  CHECK(laplace_from_uniform(0.25, 2.0) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(laplace_from_uniform(-0.25, 2.0) == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("laplace moments") {
  const Vector u = sample_laplace(1.0, 100000, 3);
  CHECK(std::abs(u.mean()) < 0.02);
  CHECK(std::abs(u.cwiseAbs().mean() - 1.0) < 0.02);
  const Vector v = sample_laplace(2.5, 100000, 4);
  CHECK(std::abs(v.cwiseAbs().mean() - 2.5) < 0.05);
  CHECK_THROWS_AS(sample_laplace(0.0, 3, 1), ArgumentError);
  CHECK_THROWS_AS(sample_laplace(-1.0, 3, 1), ArgumentError);
}

TEST_CASE("GenModelI with vanishing noise lies on the dictionary span") {
  GenModelI m{random_unit_bases(12, 5, 1), 1.0, 1e-12, 0};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SampleI f = sample_feature_I(m, s);
    CHECK((f.x - m.bases * f.u).norm() < 1e-9);
  }
  m.noise_std = 0.0;
  const SampleI f = sample_feature_I(m, 9);
  CHECK((f.x - m.bases * f.u).norm() == 0.0);
}

TEST_CASE("GenModelI active count limits the support") {
  GenModelI m{random_unit_bases(10, 20, 2), 1.0, 0.1, 3};
  Matrix codes;
  sample_features_I(m, 50, 7, &codes);
  for (Index i = 0; i < codes.rows(); ++i) CHECK((codes.row(i).array() != 0).count() == 3);
}

TEST_CASE("GenModelI noise variance") {
  SUBCASE("single basis, orthogonal coordinate") {
    Matrix b = Matrix::Zero(2, 1);
    b(0, 0) = 1.0;
    GenModelI m{b, 1.0, 0.3, 0};
    const Matrix x = sample_features_I(m, 10000, 5);
    const double var = (x.col(1).array() - x.col(1).mean()).square().sum() / double(x.rows() - 1);
    CHECK(std::abs(var - 0.09) < 0.009);
  }
  SUBCASE("noise covariance is isotropic") {
    GenModelI m{random_unit_bases(4, 3, 8), 1.0, 0.5, 0};
    Matrix codes;
    const Matrix x = sample_features_I(m, 20000, 6, &codes);
    const Matrix eps = x - codes * m.bases.transpose();
    const Matrix c = test::naive_covariance(eps);
    for (Index a = 0; a < 4; ++a)
      for (Index b2 = 0; b2 < 4; ++b2) CHECK(std::abs(c(a, b2) - (a == b2 ? 0.25 : 0.0)) < 0.025);
  }
}

TEST_CASE("GenModelI validation") {
  Matrix b = random_unit_bases(5, 3, 1);
  b(0, 0) += 0.1;
  GenModelI m{b};
  CHECK_THROWS_AS(m.validate(), ArgumentError);
  GenModelI ok{random_unit_bases(5, 3, 1)};
  ok.laplace_scale = 0.0;
  CHECK_THROWS_AS(ok.validate(), ArgumentError);
}

namespace {

GenModelII model_ii(Index d, Index m1, Index m2, std::uint64_t seed) {
  GenModelII m;
  m.bases_d = random_unit_bases(d, m1, seed);
  m.bases_r = random_unit_bases(d, m2, seed + 1);
  m.code_prior_c = test::random_vector(m1, seed + 2);
  return m;
}

}  // namespace

TEST_CASE("GenModelII tight prior keeps u_d at c") {
  GenModelII m = model_ii(6, 4, 3, 10);
  m.lambda3 = 1e-6;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const SampleII f = sample_feature_II(m, s);
    CHECK((f.u_d - m.code_prior_c).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("GenModelII loose prior with c = 0 stays within the l1 scale") {
  GenModelII m = model_ii(6, 4, 3, 20);
  m.code_prior_c.setZero();
  m.lambda3 = 1e6;
  double total = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) total += sample_feature_II(m, std::uint64_t(s)).u_d.cwiseAbs().mean();
  CHECK(total / n < 3.0 * m.lambda2);
}

TEST_CASE("GenModelII Metropolis acceptance on the reference config") {
  GenModelII m = model_ii(10, 8, 4, 30);  // lambda1..3 = 1, 50 sweeps
  double acc = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) acc += sample_feature_II(m, s).acceptance_rate;
  acc /= 200.0;
  CHECK(acc > 0.2);
  CHECK(acc < 0.8);
}

TEST_CASE("GenModelII noiseless features lie in the joint span") {
  GenModelII m = model_ii(8, 3, 2, 40);
  m.noise_std = 0.0;
  const SampleII f = sample_feature_II(m, 1);
  CHECK((f.x - m.bases_d * f.u_d - m.bases_r * f.u_r).norm() < 1e-12);
}

TEST_CASE("sampling is deterministic and thread-count independent") {
  GenModelI m{random_unit_bases(7, 5, 3), 1.0, 0.1, 2};
  set_num_threads(1);
  const Matrix a = sample_features_I(m, 64, 11);
  set_num_threads(4);
  const Matrix b = sample_features_I(m, 64, 11);
  set_num_threads(0);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0);
  CHECK((sample_features_I(m, 64, 12) - a).norm() > 0);

  GenModelII m2 = model_ii(6, 3, 3, 50);
  set_num_threads(1);
  const Matrix c = sample_features_II(m2, 16, 5);
  set_num_threads(3);
  const Matrix d = sample_features_II(m2, 16, 5);
  set_num_threads(0);
  CHECK(std::memcmp(c.data(), d.data(), sizeof(double) * std::size_t(c.size())) == 0);
}

TEST_CASE("random basis helpers") {
  const Matrix b = random_unit_bases(9, 4, 1);
  for (Index j = 0; j < 4; ++j) CHECK(std::abs(b.col(j).norm() - 1.0) < 1e-14);
  const Matrix q = random_orthonormal(9, 4, 2);
  CHECK((q.transpose() * q - Matrix::Identity(4, 4)).norm() < 1e-12);
  CHECK_THROWS_AS(random_orthonormal(3, 4, 1), ArgumentError);
}
