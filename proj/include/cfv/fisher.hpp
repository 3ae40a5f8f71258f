#pragma once

#include "cfv/common.hpp"
#include "cfv/dataio.hpp"
#include "cfv/dictionary.hpp"
#include "cfv/gmm.hpp"
#include "cfv/sparse.hpp"
#include "cfv/supcode.hpp"

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cfv::fisher {

/// Gradient of a feature's log-likelihood w.r.t. one parameter matrix:
/// D x M, one column per basis (or mixture component).
struct FisherBlock {
  Matrix gradient;

  Index rows() const { return gradient.rows(); }
  Index cols() const { return gradient.cols(); }
};

/// (1/sigma2) r u^T for a given code, r = x - B u.
FisherBlock outer_block(const Eigen::Ref<const Vector>& residual, const Eigen::Ref<const Vector>& code, double sigma2);

/// SCFVC: u* from matching pursuit (cfg.k), G = (1/sigma2)(x - B u*) u*^T.
FisherBlock scfvc_encode(const Dictionary& bases, const Eigen::Ref<const Vector>& x, const sparse::MpConfig& cfg);

/// HSCFVC: (u_d*, u_r*) from hybrid pursuit, then one block per basis set,
/// both built on the shared final residual.
std::pair<FisherBlock, FisherBlock> hscfvc_encode(const Dictionary& bases_d, const Dictionary& bases_r,
                                                  const Eigen::Ref<const Vector>& x,
                                                  const Eigen::Ref<const Vector>& c, const sparse::MpConfig& cfg);

/// GMM-FVC: column k = gamma_k(x) (x - mu_k) / sigma_k (elementwise). With
/// variance gradients the block gains K more columns,
/// gamma_k ((x - mu_k)^2 / sigma_k^2 - 1).
FisherBlock gmmfvc_encode(const gmm::GmmModel& m, const Eigen::Ref<const Vector>& x, bool variance_gradients = false);

/// Elementwise sum in list order. Throws on shape mismatch or an empty list.
FisherBlock pool_sum(std::span<const FisherBlock> blocks);

/// sign(z) |z|^alpha, 0 < alpha <= 1.
Vector power_normalize(const Eigen::Ref<const Vector>& v, double alpha = 0.5);
Matrix power_normalize_block(const Matrix& m, double alpha = 0.5);

/// Scales every column to unit l2 norm; exactly-zero columns stay zero.
FisherBlock intra_normalize(FisherBlock b);

// -- Image level --------------------------------------------------------------

struct ScfvcEncoder {
  Dictionary bases;
  sparse::MpConfig mp;
};

/// Guidance code per feature: sparsify_top_k(sup_encode(x), mp.k1).
struct HscfvcEncoder {
  Dictionary bases_d;
  Dictionary bases_r;
  supcode::SupervisedEncoder coder;
  sparse::MpConfig mp;
};

struct GmmFvcEncoder {
  gmm::GmmModel model;
  bool variance_gradients = false;
};

using Encoder = std::variant<ScfvcEncoder, HscfvcEncoder, GmmFvcEncoder>;

/// "scfvc:<hex>", "hscfvc:<hex>" or "gmmfvc:<hex>" from the model parameters.
std::string encoder_id(const Encoder& e);

/// Column count of the signature's concatenated blocks times the feature
/// dimension.
Index signature_dim(const Encoder& e);

struct ImageSignature {
  Vector values;  // blocks flattened column-major, in encoder order
  std::string encoder_id;
};

/// Per-feature encodings summed into one block per parameter matrix (in the
/// encoder's block order: B for SCFVC, B_d then B_r for HSCFVC, the mixture
/// block for GMM-FVC). No normalisation.
std::vector<FisherBlock> pooled_blocks(const FeatureSet& fs, const Encoder& e);

/// Pipeline: encode every feature, sum-pool, power-normalise (alpha = 0.5),
/// intra-normalise each block, flatten. Parallel over features and columns;
/// the summation order is fixed, so the result is bit-identical to
/// encode_image_serial for any thread count.
ImageSignature encode_image(const FeatureSet& fs, const Encoder& e);

/// Reference path: one FisherBlock per feature, pool_sum, normalise.
ImageSignature encode_image_serial(const FeatureSet& fs, const Encoder& e);

/// Normalisation and flattening applied to pooled blocks.
Vector finalize(std::vector<FisherBlock> pooled, double alpha = 0.5);

/// Signatures for many images (N x signature_dim), parallel over images.
Matrix encode_images(const std::vector<FeatureSet>& images, const Encoder& e);

}  // namespace cfv::fisher
