#pragma once

#include "cfv/common.hpp"
#include "cfv/dataio.hpp"

#include <cstdint>
#include <vector>

namespace cfv::supcode {

/// c = max(0, P^T x + b).
struct SupervisedEncoder {
  Matrix projection;  // D x M1
  Vector bias;        // M1

  Index input_dim() const { return projection.rows(); }
  Index output_dim() const { return projection.cols(); }
  void validate() const;
};

Vector sup_encode(const SupervisedEncoder& e, const Eigen::Ref<const Vector>& x);

/// Row-wise codes (N x M1) for an N x D block.
Matrix sup_encode_rows(const SupervisedEncoder& e, const Matrix& rows);

/// Keeps the k largest entries and zeroes the rest. Ties go to the lower index.
Vector sparsify_top_k(const Eigen::Ref<const Vector>& c, Index k);

/// Guidance codes for hybrid pursuit: sparsify_top_k(sup_encode(x), k) per row.
Matrix guidance_codes(const SupervisedEncoder& e, const Matrix& rows, Index k);

/// Image-level representation used while training the coder: sum-pool the
/// codes of all local features, then apply the smoothed square root
/// sqrt(s + eps) - sqrt(eps) elementwise (pooled codes are non-negative).
Vector pooled_representation(const SupervisedEncoder& e, const Matrix& rows, double eps);

struct SupTrainConfig {
  double lr = 0.05;
  int epochs = 30;
  int batch = 8;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
  double power_eps = 1e-4;
};

/// Softmax layer trained jointly with the encoder; discarded by callers that
/// only need (P, b).
struct SoftmaxHead {
  Matrix weights;  // C x M1
  Vector bias;     // C
  std::vector<int> class_ids;
};

/// All trainable parameters; also used as the gradient container.
struct SupParams {
  Matrix projection;
  Vector bias;
  Matrix head_weights;
  Vector head_bias;

  static SupParams zeros_like(const SupParams& p);
};

/// Mean cross-entropy of the softmax posterior over `images` plus
/// (l2 / 2)(|P|^2 + |W|^2). `targets[i]` is the class index (0..C-1) of
/// images[i]. Writes the gradient into `grad` when non-null.
double sup_loss(const SupParams& params, const std::vector<const Matrix*>& images, const std::vector<int>& targets,
                double l2, double power_eps, SupParams* grad);

struct SupTrainResult {
  SupervisedEncoder encoder;
  SoftmaxHead head;
  std::vector<double> loss_trace;  // full training loss, initial then after every epoch
  double train_accuracy = 0.0;
};

/// Minibatch SGD on the cross-entropy of a softmax classifier stacked on the
/// pooled, power-normalised codes. P starts at N(0, 1/D), everything else at 0.
/// Needs at least two classes; every image must carry a label.
SupTrainResult train_sup_encoder(const std::vector<FeatureSet>& images, Index m1, const SupTrainConfig& cfg = {});

}  // namespace cfv::supcode
