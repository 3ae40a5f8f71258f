#pragma once

#include "cfv/common.hpp"
#include "cfv/dataio.hpp"

#include <cstdint>
#include <vector>

namespace cfv::synth {

/// x = B u + eps with Laplace(laplace_scale) codes and N(0, noise_std^2 I)
/// noise. With active_count > 0 only that many randomly chosen coordinates of
/// u are drawn; the rest are zero.
struct GenModelI {
  Matrix bases;  // D x M, unit-norm columns
  double laplace_scale = 1.0;
  double noise_std = 0.1;
  Index active_count = 0;

  void validate() const;
};

/// x = B_d u_d + B_r u_r + eps, u_r ~ Laplace(lambda1),
/// P(u_d | c) proportional to exp(-|u_d|_1 / lambda2 - |u_d - c|_2 / lambda3).
struct GenModelII {
  Matrix bases_d;  // D x M1
  Matrix bases_r;  // D x M2
  Vector code_prior_c;  // M1
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double noise_std = 0.1;
  Index residual_active_count = 0;  // 0 = dense u_r
  int metropolis_sweeps = 50;

  void validate() const;
};

struct SampleI {
  Vector x;
  Vector u;
};

struct SampleII {
  Vector x;
  Vector u_d;
  Vector u_r;
  double acceptance_rate = 0.0;  // Metropolis acceptance for u_d
};

/// Inverse-CDF map from v in (-1/2, 1/2) to a Laplace(scale) variate.
double laplace_from_uniform(double v, double scale);

Vector sample_laplace(double scale, Index dim, std::uint64_t seed);
Vector sample_laplace(double scale, Index dim, Rng& rng);

SampleI sample_feature_I(const GenModelI& m, std::uint64_t seed);
SampleII sample_feature_II(const GenModelII& m, std::uint64_t seed);

/// n features (rows); row i uses derive_seed(seed, i), so the result does not
/// depend on the thread count. Codes are returned in `codes` when non-null.
Matrix sample_features_I(const GenModelI& m, Index n, std::uint64_t seed, Matrix* codes = nullptr);
Matrix sample_features_II(const GenModelII& m, Index n, std::uint64_t seed);

/// Random D x M matrix with i.i.d. Gaussian entries and unit-norm columns.
Matrix random_unit_bases(Index d, Index m, std::uint64_t seed);

/// Random D x M matrix with orthonormal columns (M <= D).
Matrix random_orthonormal(Index d, Index m, std::uint64_t seed);

// -- Labelled image sets ------------------------------------------------------

struct ImageDataset {
  std::vector<FeatureSet> train;
  std::vector<FeatureSet> test;
};

/// Classes differ in their GenModelI dictionary. Every class dictionary holds
/// `shared_bases` atoms common to all classes plus its own
/// `bases_per_class - shared_bases` atoms.
struct DatasetIConfig {
  int classes = 3;
  Index dim = 100;
  Index bases_per_class = 40;
  Index shared_bases = 20;
  Index active = 5;
  double laplace_scale = 1.0;
  double noise_std = 0.1;
  Index features_per_image = 50;
  int train_per_class = 60;
  int test_per_class = 30;

  void validate() const;
};

/// Classes share B_d and B_r (up to an optional per-class perturbation) and
/// differ in the code prior c. A feature uses its
/// own class's prior with probability `class_feature_fraction` and a uniformly
/// drawn class's prior otherwise. Class priors have `prior_active` non-zero
/// entries of size prior_scale * U(0.5, 1.5).
struct DatasetIIConfig {
  int classes = 3;
  Index dim = 32;
  Index m1 = 12;
  Index m2 = 24;
  Index prior_active = 3;
  double prior_scale = 1.5;
  double class_feature_fraction = 0.45;
  double basis_perturbation = 0.4;  // per-class jitter of both bases, relative to unit columns
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 0.5;
  Index residual_active = 4;
  double noise_std = 0.1;
  int metropolis_sweeps = 20;
  Index features_per_image = 30;
  int train_per_class = 120;
  int test_per_class = 100;

  void validate() const;
};

/// Images are labelled 0..classes-1 and named "<split>_<class>_<index>".
/// Every image draws from its own derived seed, so the result does not depend
/// on the thread count.
ImageDataset make_dataset_I(const DatasetIConfig& cfg, std::uint64_t seed);
ImageDataset make_dataset_II(const DatasetIIConfig& cfg, std::uint64_t seed);

}  // namespace cfv::synth
