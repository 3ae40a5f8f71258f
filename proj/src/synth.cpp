#include "cfv/synth.hpp"

#include <cmath>
#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace cfv::synth {

namespace {

void check_unit_columns(const Matrix& b, const char* what) {
  require(b.rows() >= 1, std::string(what) + " must have at least one row");
  for (Index j = 0; j < b.cols(); ++j) {
    require(std::abs(b.col(j).norm() - 1.0) <= 1e-10,
            std::string(what) + " column " + std::to_string(j) + " is not unit norm");
  }
}

double uniform_open_half(Rng& rng) {
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  double v = uni(rng);
  while (std::abs(v) >= 0.5) v = uni(rng);
  return v;
}

// Writes Laplace draws into `count` distinct random coordinates of u (all of
// them when count == 0 or count >= size).
void fill_sparse_laplace(Vector& u, Index count, double scale, Rng& rng) {
  const Index m = u.size();
  u.setZero();
  if (count <= 0 || count >= m) {
    for (Index j = 0; j < m; ++j) u(j) = laplace_from_uniform(uniform_open_half(rng), scale);
    return;
  }
  std::vector<Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, m - 1);
    std::swap(idx[std::size_t(i)], idx[std::size_t(pick(rng))]);
    u(idx[std::size_t(i)]) = laplace_from_uniform(uniform_open_half(rng), scale);
  }
}

void add_noise(Vector& x, double std, Rng& rng) {
  if (std <= 0) return;
  std::normal_distribution<double> gauss(0.0, std);
  for (Index i = 0; i < x.size(); ++i) x(i) += gauss(rng);
}

}  // namespace

void GenModelI::validate() const {
  check_unit_columns(bases, "GenModelI bases");
  require(laplace_scale > 0, "Laplace scale must be positive");
  require(noise_std >= 0, "noise std must be non-negative");
  require(active_count >= 0 && active_count <= bases.cols(), "active_count must lie in [0, M]");
}

void GenModelII::validate() const {
  check_unit_columns(bases_d, "GenModelII bases_d");
  check_unit_columns(bases_r, "GenModelII bases_r");
  require(bases_d.rows() == bases_r.rows(), "bases_d and bases_r must share the feature dimension");
  require(code_prior_c.size() == bases_d.cols(), "code prior length must equal M1");
  require(code_prior_c.allFinite(), "code prior must be finite");
  require(lambda1 > 0 && lambda2 > 0 && lambda3 > 0, "lambda1..3 must be positive");
  require(noise_std >= 0, "noise std must be non-negative");
  require(metropolis_sweeps >= 0, "metropolis_sweeps must be non-negative");
  require(residual_active_count >= 0 && residual_active_count <= bases_r.cols(),
          "residual_active_count must lie in [0, M2]");
}

double laplace_from_uniform(double v, double scale) {
  if (v == 0.0) return 0.0;
  const double s = v > 0 ? 1.0 : -1.0;
  return -scale * s * std::log(1.0 - 2.0 * std::abs(v));
}

Vector sample_laplace(double scale, Index dim, Rng& rng) {
  require(scale > 0, "Laplace scale must be positive");
  require(dim >= 0, "dimension must be non-negative");
  Vector u(dim);
  for (Index j = 0; j < dim; ++j) u(j) = laplace_from_uniform(uniform_open_half(rng), scale);
  return u;
}

Vector sample_laplace(double scale, Index dim, std::uint64_t seed) {
  Rng rng(seed);
  return sample_laplace(scale, dim, rng);
}

SampleI sample_feature_I(const GenModelI& m, std::uint64_t seed) {
  m.validate();
  Rng rng(seed);
  SampleI s;
  s.u.resize(m.bases.cols());
  fill_sparse_laplace(s.u, m.active_count, m.laplace_scale, rng);
  s.x = m.bases * s.u;
  add_noise(s.x, m.noise_std, rng);
  return s;
}

SampleII sample_feature_II(const GenModelII& m, std::uint64_t seed) {
  m.validate();
  Rng rng(seed);
  SampleII s;

  // Single-site random-walk Metropolis started at c. The proposal scale
  // lambda2 / 2 matches the width of the l1 factor.
  const Index m1 = m.bases_d.cols();
  const Vector& c = m.code_prior_c;
  Vector u = c;
  double dist2 = 0.0;  // |u - c|^2, updated per coordinate
  const double step = m.lambda2 / 2.0;
  std::normal_distribution<double> prop(0.0, step);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t accepted = 0, proposed = 0;
  for (int sweep = 0; sweep < m.metropolis_sweeps; ++sweep) {
    for (Index j = 0; j < m1; ++j) {
      const double old_v = u(j);
      const double new_v = old_v + prop(rng);
      const double old_dj = old_v - c(j), new_dj = new_v - c(j);
      const double new_dist2 = std::max(0.0, dist2 - old_dj * old_dj + new_dj * new_dj);
      const double log_ratio = -(std::abs(new_v) - std::abs(old_v)) / m.lambda2 -
                               (std::sqrt(new_dist2) - std::sqrt(dist2)) / m.lambda3;
      ++proposed;
      if (log_ratio >= 0.0 || std::log(unit(rng)) < log_ratio) {
        u(j) = new_v;
        dist2 = new_dist2;
        ++accepted;
      }
    }
  }
  s.u_d = u;
  s.acceptance_rate = proposed ? double(accepted) / double(proposed) : 0.0;

  s.u_r.resize(m.bases_r.cols());
  fill_sparse_laplace(s.u_r, m.residual_active_count, m.lambda1, rng);
  s.x = m.bases_d * s.u_d + m.bases_r * s.u_r;
  add_noise(s.x, m.noise_std, rng);
  return s;
}

Matrix sample_features_I(const GenModelI& m, Index n, std::uint64_t seed, Matrix* codes) {
  m.validate();
  Matrix x(n, m.bases.rows());
  if (codes) codes->resize(n, m.bases.cols());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    auto s = sample_feature_I(m, derive_seed(seed, std::uint64_t(i)));
    x.row(i) = s.x.transpose();
    if (codes) codes->row(i) = s.u.transpose();
  }
  return x;
}

Matrix sample_features_II(const GenModelII& m, Index n, std::uint64_t seed) {
  m.validate();
  Matrix x(n, m.bases_d.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    x.row(i) = sample_feature_II(m, derive_seed(seed, std::uint64_t(i))).x.transpose();
  }
  return x;
}

Matrix random_unit_bases(Index d, Index m, std::uint64_t seed) {
  require(d >= 1 && m >= 0, "bad basis shape");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix b(d, m);
  for (Index j = 0; j < m; ++j) {
    do {
      for (Index i = 0; i < d; ++i) b(i, j) = gauss(rng);
    } while (b.col(j).norm() == 0.0);
    b.col(j).normalize();
  }
  return b;
}

Matrix random_orthonormal(Index d, Index m, std::uint64_t seed) {
  require(m <= d, "cannot build more than D orthonormal columns");
  const Matrix g = random_unit_bases(d, m, seed);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, m);
  for (Index j = 0; j < m; ++j) q.col(j).normalize();
  return q;
}

void DatasetIConfig::validate() const {
  require(classes >= 2, "need at least two classes");
  require(dim >= 1 && bases_per_class >= 1, "dim and bases_per_class must be positive");
  require(shared_bases >= 0 && shared_bases <= bases_per_class, "shared_bases must lie in [0, bases_per_class]");
  require(active >= 1 && active <= bases_per_class, "active must lie in [1, bases_per_class]");
  require(laplace_scale > 0 && noise_std >= 0, "laplace_scale must be positive and noise_std non-negative");
  require(features_per_image >= 1, "features_per_image must be positive");
  require(train_per_class >= 1 && test_per_class >= 0, "need training images for every class");
}

void DatasetIIConfig::validate() const {
  require(classes >= 2, "need at least two classes");
  require(dim >= 1 && m1 >= 1 && m2 >= 1, "dim, m1 and m2 must be positive");
  require(prior_active >= 1 && prior_active <= m1, "prior_active must lie in [1, m1]");
  require(prior_scale > 0, "prior_scale must be positive");
  require(class_feature_fraction >= 0 && class_feature_fraction <= 1, "class_feature_fraction must lie in [0, 1]");
  require(basis_perturbation >= 0, "basis_perturbation must be non-negative");
  require(residual_active >= 0 && residual_active <= m2, "residual_active must lie in [0, m2]");
  require(features_per_image >= 1, "features_per_image must be positive");
  require(train_per_class >= 1 && test_per_class >= 0, "need training images for every class");
}

namespace {

// Image i of the combined (train then test) list: class, split and name.
struct ImageSlot {
  int label;
  bool train;
  std::string id;
};

std::vector<ImageSlot> image_slots(int classes, int train_per_class, int test_per_class) {
  std::vector<ImageSlot> slots;
  for (int split = 0; split < 2; ++split) {
    const int per = split == 0 ? train_per_class : test_per_class;
    for (int c = 0; c < classes; ++c)
      for (int i = 0; i < per; ++i)
        slots.push_back({c, split == 0, std::string(split == 0 ? "train_" : "test_") + std::to_string(c) + "_" +
                                            std::to_string(i)});
  }
  return slots;
}

template <class Fill>
ImageDataset assemble(const std::vector<ImageSlot>& slots, Fill&& fill) {
  std::vector<FeatureSet> all(slots.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < slots.size(); ++i) {
    all[i].features = fill(i, slots[i].label);
    all[i].image_id = slots[i].id;
    all[i].label = slots[i].label;
  }
  ImageDataset out;
  for (std::size_t i = 0; i < slots.size(); ++i) (slots[i].train ? out.train : out.test).push_back(std::move(all[i]));
  return out;
}

}  // namespace

ImageDataset make_dataset_I(const DatasetIConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Index own = cfg.bases_per_class - cfg.shared_bases;
  const Matrix shared = random_unit_bases(cfg.dim, cfg.shared_bases, derive_seed(seed, 0));
  std::vector<GenModelI> models;
  for (int c = 0; c < cfg.classes; ++c) {
    GenModelI m;
    m.bases.resize(cfg.dim, cfg.bases_per_class);
    m.bases.leftCols(cfg.shared_bases) = shared;
    m.bases.rightCols(own) = random_unit_bases(cfg.dim, own, derive_seed(seed, 1 + std::uint64_t(c)));
    m.laplace_scale = cfg.laplace_scale;
    m.noise_std = cfg.noise_std;
    m.active_count = cfg.active;
    models.push_back(std::move(m));
  }
  const std::uint64_t image_base = derive_seed(seed, 1000003);
  return assemble(image_slots(cfg.classes, cfg.train_per_class, cfg.test_per_class), [&](std::size_t i, int label) {
    Matrix x(cfg.features_per_image, cfg.dim);
    const std::uint64_t s = derive_seed(image_base, i);
    for (Index t = 0; t < cfg.features_per_image; ++t)
      x.row(t) = sample_feature_I(models[std::size_t(label)], derive_seed(s, std::uint64_t(t))).x.transpose();
    return x;
  });
}

ImageDataset make_dataset_II(const DatasetIIConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GenModelII base;
  base.bases_d = random_unit_bases(cfg.dim, cfg.m1, derive_seed(seed, 0));
  base.bases_r = random_unit_bases(cfg.dim, cfg.m2, derive_seed(seed, 1));
  base.lambda1 = cfg.lambda1;
  base.lambda2 = cfg.lambda2;
  base.lambda3 = cfg.lambda3;
  base.noise_std = cfg.noise_std;
  base.residual_active_count = cfg.residual_active;
  base.metropolis_sweeps = cfg.metropolis_sweeps;

  std::vector<GenModelII> models;
  Rng rng(derive_seed(seed, 2));
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  for (int c = 0; c < cfg.classes; ++c) {
    GenModelII m = base;
    if (cfg.basis_perturbation > 0) {
      const double step = cfg.basis_perturbation / std::sqrt(double(cfg.dim));
      std::normal_distribution<double> g(0.0, step);
      for (Matrix* b : {&m.bases_d, &m.bases_r}) {
        for (Index j = 0; j < b->cols(); ++j)
          for (Index i = 0; i < b->rows(); ++i) (*b)(i, j) += g(rng);
        b->colwise().normalize();
      }
    }
    m.code_prior_c = Vector::Zero(cfg.m1);
    std::vector<Index> idx(static_cast<std::size_t>(cfg.m1));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Index a = 0; a < cfg.prior_active; ++a) m.code_prior_c(idx[std::size_t(a)]) = cfg.prior_scale * mag(rng);
    models.push_back(std::move(m));
  }

  const std::uint64_t image_base = derive_seed(seed, 1000003);
  return assemble(image_slots(cfg.classes, cfg.train_per_class, cfg.test_per_class), [&](std::size_t i, int label) {
    Matrix x(cfg.features_per_image, cfg.dim);
    Rng pick(derive_seed(image_base, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> any(0, cfg.classes - 1);
    for (Index t = 0; t < cfg.features_per_image; ++t) {
      const int source = unit(pick) < cfg.class_feature_fraction ? label : any(pick);
      x.row(t) = sample_feature_II(models[std::size_t(source)], pick()).x.transpose();
    }
    return x;
  });
}

}  // namespace cfv::synth
