#include "cfv/experiments.hpp"

#include "cfv/dict_learn.hpp"
#include "cfv/gmm.hpp"
#include "cfv/sparse.hpp"
#include "cfv/synth.hpp"

#include <charconv>

namespace cfv::experiments {

void ResolutionConfig::validate() const {
  require(!dims.empty(), "resolution experiment needs at least one dimension");
  for (Index d : dims) require(d >= 1, "dimensions must be positive");
  for (Index k : gmm_sizes) require(k >= 1 && k <= train_features, "GMM sizes must lie in [1, train_features]");
  for (Index m : basis_counts)
    require(m >= sparsity && m <= train_features, "basis counts must lie in [sparsity, train_features]");
  require(true_bases >= 1 && active >= 1 && active <= true_bases, "active must lie in [1, true_bases]");
  require(laplace_scale > 0 && noise_std >= 0, "bad generative scales");
  require(test_features >= 1 && sparsity >= 0 && gmm_iters >= 0 && dict_iters >= 0, "bad experiment sizes");
}

std::vector<ResolutionRow> resolution_experiment(const ResolutionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<ResolutionRow> rows;
  for (std::size_t di = 0; di < cfg.dims.size(); ++di) {
    const Index d = cfg.dims[di];
    const std::uint64_t s = derive_seed(seed, di);
    synth::GenModelI gen;
    gen.bases = synth::random_unit_bases(d, cfg.true_bases, derive_seed(s, 0));
    gen.laplace_scale = cfg.laplace_scale;
    gen.noise_std = cfg.noise_std;
    gen.active_count = cfg.active;
    const Matrix train = synth::sample_features_I(gen, cfg.train_features, derive_seed(s, 1));
    const Matrix test = synth::sample_features_I(gen, cfg.test_features, derive_seed(s, 2));

    for (Index k : cfg.gmm_sizes) {
      gmm::GmmConfig gc;
      gc.max_iters = cfg.gmm_iters;
      gc.seed = derive_seed(s, 3);
      const gmm::GmmModel m = gmm::fit_gmm(train, k, gc).model;
      double total = 0.0;
      for (Index i = 0; i < test.rows(); ++i) total += gmm::nearest_prototype_distance(m, test.row(i).transpose());
      rows.push_back({"gmm", k, d, total / double(test.rows())});
    }
    for (Index m : cfg.basis_counts) {
      dict::DictLearnConfig dc;
      dc.k = cfg.sparsity;
      dc.iters = cfg.dict_iters;
      dc.seed = derive_seed(s, 4);
      const Dictionary b = dict::learn_dictionary(train, m, dc).dictionary;
      Matrix residuals;
      sparse::mp_encode_rows(b, test, cfg.sparsity, &residuals);
      double total = 0.0;
      for (Index i = 0; i < test.rows(); ++i) total += residuals.row(i).norm();
      rows.push_back({"sc", m, d, total / double(test.rows())});
    }
  }
  return rows;
}

void write_resolution_csv(std::ostream& out, const std::vector<ResolutionRow>& rows) {
  out << "model,count,dim,mean_distance\n";
  for (const auto& r : rows) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), r.mean_distance);
    out << r.model << ',' << r.count << ',' << r.dim << ',' << std::string(buf, res.ptr) << '\n';
  }
}

}  // namespace cfv::experiments
