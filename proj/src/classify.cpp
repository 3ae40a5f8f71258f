#include "cfv/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cfv::classify {

namespace {

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

// d/dz log(1 + exp(-z)) = -1 / (1 + exp(z)).
double softplus_neg_grad(double z) {
  if (z > 0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

void check_samples(const Matrix& samples, std::span<const int> labels) {
  require(samples.rows() >= 1, "need at least one sample");
  require(Index(labels.size()) == samples.rows(), "one label per sample required");
  require(samples.allFinite(), "samples must be finite");
}

}  // namespace

void LinearModel::validate() const {
  require(weights.rows() >= 2, "a linear model needs at least two classes");
  require(bias.size() == weights.rows() && Index(class_ids.size()) == weights.rows(), "linear model shape mismatch");
  require(weights.allFinite() && bias.allFinite(), "linear model parameters must be finite");
  require(std::is_sorted(class_ids.begin(), class_ids.end()) &&
              std::adjacent_find(class_ids.begin(), class_ids.end()) == class_ids.end(),
          "class ids must be strictly ascending");
}

double ovr_objective(const LinearModel& m, const Matrix& samples, std::span<const int> labels, double l2,
                     LinearModel* grad) {
  check_samples(samples, labels);
  require(samples.cols() == m.dim(), "sample dimension mismatch");
  const Matrix scores = (samples * m.weights.transpose()).rowwise() + m.bias.transpose();  // N x C
  const double inv_n = 1.0 / double(samples.rows());
  double loss = 0.0;
  Matrix dscore = Matrix::Zero(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    for (Index c = 0; c < scores.cols(); ++c) {
      const double y = labels[std::size_t(i)] == m.class_ids[std::size_t(c)] ? 1.0 : -1.0;
      const double z = y * scores(i, c);
      loss += softplus_neg(z);
      dscore(i, c) = y * softplus_neg_grad(z) * inv_n;
    }
  }
  loss = loss * inv_n + 0.5 * l2 * m.weights.squaredNorm();
  if (grad) {
    grad->class_ids = m.class_ids;
    grad->weights = dscore.transpose() * samples + l2 * m.weights;
    grad->bias = dscore.colwise().sum().transpose();
  }
  return loss;
}

LinearTrainResult train_linear(const Matrix& samples, std::span<const int> labels, const LinearTrainConfig& cfg) {
  check_samples(samples, labels);
  require(cfg.epochs >= 0 && cfg.lr >= 0 && cfg.l2 >= 0, "epochs, lr and l2 must be non-negative");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  require(counts.size() >= 2, "training needs at least two classes");

  LinearTrainResult out;
  LinearModel& m = out.model;
  for (const auto& [id, n] : counts) m.class_ids.push_back(id);
  const Index classes = Index(m.class_ids.size());
  m.weights = Matrix::Zero(classes, samples.cols());
  m.bias = Vector::Zero(classes);

  // One shared order per epoch, drawn up front so the per-class loops need no RNG.
  const Index n = samples.rows();
  std::vector<std::vector<Index>> orders(std::size_t(cfg.epochs));
  Rng rng(cfg.seed);
  for (auto& o : orders) {
    o.resize(std::size_t(n));
    std::iota(o.begin(), o.end(), Index{0});
    std::shuffle(o.begin(), o.end(), rng);
  }

  out.objective_trace.push_back(ovr_objective(m, samples, labels, cfg.l2));
  // Per-epoch weights so the objective trace can be computed afterwards.
  Matrix w_hist(classes * std::max(cfg.epochs, 1), samples.cols());
  Matrix b_hist(classes, std::max(cfg.epochs, 1));

#pragma omp parallel for schedule(dynamic, 1)
  for (Index c = 0; c < classes; ++c) {
    Vector w = Vector::Zero(samples.cols());
    double b = 0.0;
    const int id = m.class_ids[std::size_t(c)];
    for (int e = 0; e < cfg.epochs; ++e) {
      for (Index i : orders[std::size_t(e)]) {
        const double y = labels[std::size_t(i)] == id ? 1.0 : -1.0;
        const double z = y * (samples.row(i).dot(w) + b);
        const double g = y * softplus_neg_grad(z);
        w = (1.0 - cfg.lr * cfg.l2) * w - (cfg.lr * g) * samples.row(i).transpose();
        b -= cfg.lr * g;
      }
      w_hist.row(Index(e) * classes + c) = w.transpose();
      b_hist(c, e) = b;
    }
  }

  for (int e = 0; e < cfg.epochs; ++e) {
    m.weights = w_hist.middleRows(Index(e) * classes, classes);
    m.bias = b_hist.col(e);
    out.objective_trace.push_back(ovr_objective(m, samples, labels, cfg.l2));
  }
  return out;
}

Prediction predict(const LinearModel& m, const Eigen::Ref<const Vector>& signature) {
  require(signature.size() == m.dim(), "signature dimension " + std::to_string(signature.size()) +
                                           " does not match the model's " + std::to_string(m.dim()));
  Prediction p;
  p.scores = m.weights * signature + m.bias;
  Index best = 0;
  for (Index c = 1; c < p.scores.size(); ++c)
    if (p.scores(c) > p.scores(best)) best = c;
  p.class_id = m.class_ids[std::size_t(best)];
  return p;
}

double average_precision(const Eigen::Ref<const Vector>& scores, const std::vector<bool>& positive) {
  require(Index(positive.size()) == scores.size(), "one relevance flag per score required");
  std::vector<Index> order(positive.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (positive[std::size_t(order[r])]) {
      ++hits;
      sum += double(hits) / double(r + 1);
    }
  }
  return hits ? sum / double(hits) : std::numeric_limits<double>::quiet_NaN();
}

Metrics evaluate(const LinearModel& m, const Matrix& samples, std::span<const int> labels) {
  check_samples(samples, labels);
  require(samples.cols() == m.dim(), "sample dimension mismatch");
  Metrics out;
  out.class_ids = m.class_ids;
  const Index n = samples.rows();
  const Index classes = m.classes();
  Matrix scores(n, classes);
  std::vector<int> predicted(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const auto p = predict(m, samples.row(i).transpose());
    scores.row(i) = p.scores.transpose();
    predicted[std::size_t(i)] = p.class_id;
  }
  std::size_t correct = 0;
  for (Index i = 0; i < n; ++i) correct += predicted[std::size_t(i)] == labels[std::size_t(i)];
  out.accuracy = double(correct) / double(n);

  double ap_sum = 0.0;
  int ap_count = 0;
  for (Index c = 0; c < classes; ++c) {
    const int id = m.class_ids[std::size_t(c)];
    std::size_t tp = 0, pred = 0;
    std::vector<bool> pos(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      pos[std::size_t(i)] = labels[std::size_t(i)] == id;
      if (predicted[std::size_t(i)] == id) {
        ++pred;
        tp += pos[std::size_t(i)];
      }
    }
    out.precision.push_back(pred ? double(tp) / double(pred) : 0.0);
    const double ap = average_precision(scores.col(c), pos);
    out.average_precision.push_back(ap);
    if (!std::isnan(ap)) {
      ap_sum += ap;
      ++ap_count;
    }
  }
  out.mean_average_precision = ap_count ? ap_sum / ap_count : 0.0;
  return out;
}

}  // namespace cfv::classify
