#pragma once

#include "cfv/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cfv::classify {

/// Affine scores W s + b, one row per class. class_ids are ascending.
struct LinearModel {
  Matrix weights;  // C x S
  Vector bias;     // C
  std::vector<int> class_ids;

  Index classes() const { return weights.rows(); }
  Index dim() const { return weights.cols(); }
  void validate() const;
};

struct LinearTrainConfig {
  double l2 = 1e-4;
  int epochs = 30;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

struct LinearTrainResult {
  LinearModel model;
  std::vector<double> objective_trace;  // initial, then after every epoch
};

/// One-vs-rest l2-regularised logistic loss,
///   (1/N) sum_i sum_c log(1 + exp(-y_ic (w_c . s_i + b_c))) + (l2/2) |W|^2,
/// with y_ic = +1 when sample i has class c and -1 otherwise. Gradient into
/// `grad` (same shapes as the model) when non-null.
double ovr_objective(const LinearModel& m, const Matrix& samples, std::span<const int> labels, double l2,
                     LinearModel* grad = nullptr);

/// Plain SGD from zero weights, one sample at a time in a seeded shuffled
/// order per epoch. The per-class problems are independent and run in
/// parallel; each uses the same sample order.
LinearTrainResult train_linear(const Matrix& samples, std::span<const int> labels, const LinearTrainConfig& cfg = {});

struct Prediction {
  int class_id = -1;
  Vector scores;
};

/// Argmax of the affine scores; ties go to the lower class id.
Prediction predict(const LinearModel& m, const Eigen::Ref<const Vector>& signature);

struct Metrics {
  double accuracy = 0.0;
  std::vector<int> class_ids;
  std::vector<double> precision;          // per class; 0 when the class is never predicted
  std::vector<double> average_precision;  // per class; NaN when the class has no positives
  double mean_average_precision = 0.0;    // over classes with positives
};

/// Average precision of one ranking: samples sorted by descending score (ties
/// by lower index); mean of precision@rank over the positive samples.
double average_precision(const Eigen::Ref<const Vector>& scores, const std::vector<bool>& positive);

Metrics evaluate(const LinearModel& m, const Matrix& samples, std::span<const int> labels);

}  // namespace cfv::classify
