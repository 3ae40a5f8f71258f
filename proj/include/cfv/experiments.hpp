#pragma once

#include "cfv/common.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace cfv::experiments {

/// Modelling resolution of GMMs versus learned dictionaries on GenModelI data.
/// For each feature dimension a ground-truth dictionary with `true_bases`
/// atoms generates training and held-out features; every fitted model is
/// scored by the mean distance from a held-out feature to its closest
/// prototype (GMM mean, or the matching-pursuit reconstruction B u*).
struct ResolutionConfig {
  std::vector<Index> dims{200, 500, 1000};
  std::vector<Index> gmm_sizes{100, 200, 500};
  std::vector<Index> basis_counts{100};
  Index true_bases = 150;
  Index active = 5;
  double laplace_scale = 1.0;
  double noise_std = 0.01;
  Index train_features = 10000;
  Index test_features = 500;
  int sparsity = 5;
  int gmm_iters = 15;
  int dict_iters = 10;

  void validate() const;
};

struct ResolutionRow {
  std::string model;  // "gmm" or "sc"
  Index count = 0;    // components or bases
  Index dim = 0;
  double mean_distance = 0.0;
};

std::vector<ResolutionRow> resolution_experiment(const ResolutionConfig& cfg, std::uint64_t seed);

/// Header `model,count,dim,mean_distance`, one row per configuration.
void write_resolution_csv(std::ostream& out, const std::vector<ResolutionRow>& rows);

}  // namespace cfv::experiments
