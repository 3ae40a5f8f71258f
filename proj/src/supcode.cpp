#include "cfv/supcode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace cfv::supcode {

void SupervisedEncoder::validate() const {
  require(projection.rows() >= 1 && projection.cols() >= 1, "supervised encoder needs a non-empty projection");
  require(bias.size() == projection.cols(), "supervised encoder bias length mismatch");
  require(projection.allFinite() && bias.allFinite(), "supervised encoder parameters must be finite");
}

Vector sup_encode(const SupervisedEncoder& e, const Eigen::Ref<const Vector>& x) {
  require(x.size() == e.input_dim(), "supervised encoder input dimension mismatch");
  return (e.projection.transpose() * x + e.bias).cwiseMax(0.0);
}

Matrix sup_encode_rows(const SupervisedEncoder& e, const Matrix& rows) {
  require(rows.cols() == e.input_dim(), "supervised encoder input dimension mismatch");
  Matrix a = rows * e.projection;
  a.rowwise() += e.bias.transpose();
  return a.cwiseMax(0.0);
}

Vector sparsify_top_k(const Eigen::Ref<const Vector>& c, Index k) {
  require(k >= 0 && k <= c.size(), "top-k must lie in [0, size]");
  std::vector<Index> order(static_cast<std::size_t>(c.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return c(a) > c(b); });
  Vector out = Vector::Zero(c.size());
  for (Index i = 0; i < k; ++i) out(order[std::size_t(i)]) = c(order[std::size_t(i)]);
  return out;
}

Matrix guidance_codes(const SupervisedEncoder& e, const Matrix& rows, Index k) {
  require(rows.cols() == e.input_dim(), "supervised encoder input dimension mismatch");
  require(k >= 0 && k <= e.output_dim(), "top-k must lie in [0, M1]");
  Matrix codes(rows.rows(), e.output_dim());
  // Row by row through sup_encode so single-feature callers get the same bits.
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows.rows(); ++i)
    codes.row(i) = sparsify_top_k(sup_encode(e, rows.row(i).transpose()), k).transpose();
  return codes;
}

Vector pooled_representation(const SupervisedEncoder& e, const Matrix& rows, double eps) {
  const Vector s = sup_encode_rows(e, rows).colwise().sum().transpose();
  return ((s.array() + eps).sqrt() - std::sqrt(eps)).matrix();
}

SupParams SupParams::zeros_like(const SupParams& p) {
  return {Matrix::Zero(p.projection.rows(), p.projection.cols()), Vector::Zero(p.bias.size()),
          Matrix::Zero(p.head_weights.rows(), p.head_weights.cols()), Vector::Zero(p.head_bias.size())};
}

namespace {

// Cross-entropy of one image and, when grad != nullptr, its (unregularised)
// gradient accumulated into *grad.
double image_loss(const SupParams& p, const Matrix& x, int target, double eps, SupParams* grad) {
  Matrix a = x * p.projection;
  a.rowwise() += p.bias.transpose();
  const Matrix h = a.cwiseMax(0.0);
  const Vector s = h.colwise().sum().transpose();
  const Vector root = (s.array() + eps).sqrt().matrix();
  const Vector z = (root.array() - std::sqrt(eps)).matrix();
  Vector logits = p.head_weights * z + p.head_bias;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  const double loss = lse - logits(target);
  if (grad) {
    Vector dlogits = (logits.array() - lse).exp().matrix();
    dlogits(target) -= 1.0;
    grad->head_weights.noalias() += dlogits * z.transpose();
    grad->head_bias += dlogits;
    const Vector ds = ((p.head_weights.transpose() * dlogits).array() * 0.5 / root.array()).matrix();
    Matrix da = (a.array() > 0.0).cast<double>().matrix();
    da.array().rowwise() *= ds.transpose().array();
    grad->projection.noalias() += x.transpose() * da;
    grad->bias += da.colwise().sum().transpose();
  }
  return loss;
}

void check_params(const SupParams& p) {
  require(p.bias.size() == p.projection.cols() && p.head_weights.cols() == p.projection.cols() &&
              p.head_bias.size() == p.head_weights.rows(),
          "supervised coder parameter shapes disagree");
}

}  // namespace

double sup_loss(const SupParams& params, const std::vector<const Matrix*>& images, const std::vector<int>& targets,
                double l2, double power_eps, SupParams* grad) {
  check_params(params);
  require(images.size() == targets.size() && !images.empty(), "need one target per image");
  const std::size_t n = images.size();
  std::vector<double> losses(n);
  for (const Matrix* im : images) require(im->cols() == params.projection.rows(), "image feature dimension mismatch");
  std::vector<SupParams> parts(grad ? n : 0);
  // Per-image gradients summed in index order: thread-count independent.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) {
    if (grad) parts[i] = SupParams::zeros_like(params);
    losses[i] = image_loss(params, *images[i], targets[i], power_eps, grad ? &parts[i] : nullptr);
  }
  double loss = 0.0;
  for (double v : losses) loss += v;
  loss /= double(n);
  loss += 0.5 * l2 * (params.projection.squaredNorm() + params.head_weights.squaredNorm());
  if (grad) {
    *grad = SupParams::zeros_like(params);
    for (const auto& g : parts) {
      grad->projection += g.projection;
      grad->bias += g.bias;
      grad->head_weights += g.head_weights;
      grad->head_bias += g.head_bias;
    }
    const double inv = 1.0 / double(n);
    grad->projection = grad->projection * inv + l2 * params.projection;
    grad->bias *= inv;
    grad->head_weights = grad->head_weights * inv + l2 * params.head_weights;
    grad->head_bias *= inv;
  }
  return loss;
}

SupTrainResult train_sup_encoder(const std::vector<FeatureSet>& images, Index m1, const SupTrainConfig& cfg) {
  require(!images.empty(), "no training images");
  require(m1 >= 1, "code dimension must be positive");
  require(cfg.epochs >= 0 && cfg.batch >= 1, "epochs must be >= 0 and batch >= 1");
  require(cfg.lr >= 0 && cfg.l2 >= 0 && cfg.power_eps > 0, "lr and l2 must be >= 0, power_eps > 0");

  std::map<int, int> class_index;
  for (const auto& im : images) {
    im.validate();
    require(im.label.has_value(), "training image '" + im.image_id + "' has no label");
    class_index.emplace(*im.label, 0);
  }
  require(class_index.size() >= 2, "supervised coder training needs at least two classes");
  const Index d = images.front().dim();
  SoftmaxHead head;
  for (auto& [label, idx] : class_index) {
    idx = int(head.class_ids.size());
    head.class_ids.push_back(label);
  }
  const Index classes = Index(head.class_ids.size());

  std::vector<const Matrix*> all;
  std::vector<int> targets;
  for (const auto& im : images) {
    require(im.dim() == d, "all training images must share the feature dimension");
    all.push_back(&im.features);
    targets.push_back(class_index.at(*im.label));
  }

  Rng rng(cfg.seed);
  std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(double(d)));
  SupParams p{Matrix(d, m1), Vector::Zero(m1), Matrix::Zero(classes, m1), Vector::Zero(classes)};
  for (Index j = 0; j < m1; ++j)
    for (Index i = 0; i < d; ++i) p.projection(i, j) = init(rng);

  SupTrainResult out;
  out.loss_trace.push_back(sup_loss(p, all, targets, cfg.l2, cfg.power_eps, nullptr));
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SupParams g;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch));
      std::vector<const Matrix*> bx;
      std::vector<int> by;
      for (std::size_t i = start; i < end; ++i) {
        bx.push_back(all[order[i]]);
        by.push_back(targets[order[i]]);
      }
      sup_loss(p, bx, by, cfg.l2, cfg.power_eps, &g);
      p.projection -= cfg.lr * g.projection;
      p.bias -= cfg.lr * g.bias;
      p.head_weights -= cfg.lr * g.head_weights;
      p.head_bias -= cfg.lr * g.head_bias;
    }
    out.loss_trace.push_back(sup_loss(p, all, targets, cfg.l2, cfg.power_eps, nullptr));
  }

  out.encoder = {p.projection, p.bias};
  head.weights = p.head_weights;
  head.bias = p.head_bias;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Vector z = pooled_representation(out.encoder, *all[i], cfg.power_eps);
    Index arg = 0;
    (head.weights * z + head.bias).maxCoeff(&arg);
    if (int(arg) == targets[i]) ++correct;
  }
  out.train_accuracy = double(correct) / double(all.size());
  out.head = std::move(head);
  return out;
}

}  // namespace cfv::supcode
