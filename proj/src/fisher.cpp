#include "cfv/fisher.hpp"

#include <cmath>
#include <cstdio>

namespace cfv::fisher {

namespace {

// Scalar kernels shared by the per-feature and pooled paths so both round
// identically.
inline double outer_term(double r, double u, double inv_sigma2) { return (r * u) * inv_sigma2; }
inline double mean_term(double gamma, double diff, double sd) { return gamma * (diff / sd); }
inline double var_term(double gamma, double diff, double sd) {
  const double z = diff / sd;
  return gamma * (z * z - 1.0);
}

// Adds column j of one feature's outer-product block into `acc`.
void add_outer_column(Eigen::Ref<Vector> acc, const Eigen::Ref<const Vector>& r, double u, double inv_sigma2) {
  for (Index d = 0; d < r.size(); ++d) acc(d) += outer_term(r(d), u, inv_sigma2);
}

// Pooled (x - Bu) u^T over all rows, parallel over columns, rows summed in order.
Matrix pooled_outer(const Matrix& residuals, const Matrix& codes, double inv_sigma2) {
  Matrix g = Matrix::Zero(residuals.cols(), codes.cols());
#pragma omp parallel for schedule(static)
  for (Index m = 0; m < codes.cols(); ++m) {
    for (Index i = 0; i < codes.rows(); ++i) {
      const double u = codes(i, m);
      if (u != 0.0) add_outer_column(g.col(m), residuals.row(i).transpose(), u, inv_sigma2);
    }
  }
  return g;
}

Matrix standard_deviations(const gmm::GmmModel& m) { return m.variances.cwiseSqrt(); }

}  // namespace

FisherBlock outer_block(const Eigen::Ref<const Vector>& residual, const Eigen::Ref<const Vector>& code, double sigma2) {
  require(sigma2 > 0, "sigma2 must be positive");
  const double inv = 1.0 / sigma2;
  FisherBlock b{Matrix::Zero(residual.size(), code.size())};
  for (Index m = 0; m < code.size(); ++m)
    for (Index d = 0; d < residual.size(); ++d) b.gradient(d, m) = outer_term(residual(d), code(m), inv);
  return b;
}

FisherBlock scfvc_encode(const Dictionary& bases, const Eigen::Ref<const Vector>& x, const sparse::MpConfig& cfg) {
  cfg.validate();
  const auto res = sparse::mp_encode(bases, x, cfg.k);
  return outer_block(res.residual, res.code.values, cfg.sigma2);
}

std::pair<FisherBlock, FisherBlock> hscfvc_encode(const Dictionary& bases_d, const Dictionary& bases_r,
                                                  const Eigen::Ref<const Vector>& x,
                                                  const Eigen::Ref<const Vector>& c, const sparse::MpConfig& cfg) {
  const auto h = sparse::hybrid_mp_encode(bases_d, bases_r, x, c, cfg);
  return {outer_block(h.residual, h.d.values, cfg.sigma2), outer_block(h.residual, h.r.values, cfg.sigma2)};
}

FisherBlock gmmfvc_encode(const gmm::GmmModel& m, const Eigen::Ref<const Vector>& x, bool variance_gradients) {
  require(x.size() == m.dim(), "GMM dimension mismatch");
  const Vector gamma = gmm::responsibilities(m, x);
  const Matrix sd = standard_deviations(m);
  const Index k = m.components();
  FisherBlock b{Matrix::Zero(m.dim(), variance_gradients ? 2 * k : k)};
  for (Index c = 0; c < k; ++c) {
    for (Index d = 0; d < m.dim(); ++d) {
      const double diff = x(d) - m.means(c, d);
      b.gradient(d, c) = mean_term(gamma(c), diff, sd(c, d));
      if (variance_gradients) b.gradient(d, k + c) = var_term(gamma(c), diff, sd(c, d));
    }
  }
  return b;
}

FisherBlock pool_sum(std::span<const FisherBlock> blocks) {
  require(!blocks.empty(), "nothing to pool");
  FisherBlock acc{Matrix::Zero(blocks.front().rows(), blocks.front().cols())};
  for (const auto& b : blocks) {
    require(b.rows() == acc.rows() && b.cols() == acc.cols(), "cannot pool blocks of different shapes");
    acc.gradient += b.gradient;
  }
  return acc;
}

Vector power_normalize(const Eigen::Ref<const Vector>& v, double alpha) {
  require(alpha > 0 && alpha <= 1, "power exponent must lie in (0, 1]");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double z = v(i);
    const double mag = alpha == 1.0 ? std::abs(z) : std::pow(std::abs(z), alpha);
    out(i) = z < 0 ? -mag : (z > 0 ? mag : 0.0);
  }
  return out;
}

Matrix power_normalize_block(const Matrix& m, double alpha) {
  const Vector flat = power_normalize(Vector(Eigen::Map<const Vector>(m.data(), m.size())), alpha);
  return Eigen::Map<const Matrix>(flat.data(), m.rows(), m.cols());
}

FisherBlock intra_normalize(FisherBlock b) {
  for (Index j = 0; j < b.cols(); ++j) {
    const double n = b.gradient.col(j).norm();
    if (n > 0.0) b.gradient.col(j) /= n;
  }
  return b;
}

std::string encoder_id(const Encoder& e) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix_cfg = [&](const sparse::MpConfig& c) {
    const double vals[5] = {double(c.k), double(c.k1), double(c.k2), c.lambda, c.sigma2};
    h = fnv1a(vals, sizeof(vals), h);
  };
  const char* kind = "";
  std::visit(
      [&](const auto& enc) {
        using T = std::decay_t<decltype(enc)>;
        if constexpr (std::is_same_v<T, ScfvcEncoder>) {
          kind = "scfvc";
          h = fingerprint(enc.bases.bases(), h);
          mix_cfg(enc.mp);
        } else if constexpr (std::is_same_v<T, HscfvcEncoder>) {
          kind = "hscfvc";
          h = fingerprint(enc.bases_d.bases(), h);
          h = fingerprint(enc.bases_r.bases(), h);
          h = fingerprint(enc.coder.projection, h);
          h = fingerprint(enc.coder.bias, h);
          mix_cfg(enc.mp);
        } else {
          kind = "gmmfvc";
          h = fingerprint(enc.model.weights, h);
          h = fingerprint(enc.model.means, h);
          h = fingerprint(enc.model.variances, h);
          const unsigned char flag = enc.variance_gradients ? 1 : 0;
          h = fnv1a(&flag, 1, h);
        }
      },
      e);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(kind) + ":" + buf;
}

Index signature_dim(const Encoder& e) {
  return std::visit(
      [](const auto& enc) -> Index {
        using T = std::decay_t<decltype(enc)>;
        if constexpr (std::is_same_v<T, ScfvcEncoder>)
          return enc.bases.dim() * enc.bases.size();
        else if constexpr (std::is_same_v<T, HscfvcEncoder>)
          return enc.bases_d.dim() * (enc.bases_d.size() + enc.bases_r.size());
        else
          return enc.model.dim() * enc.model.components() * (enc.variance_gradients ? 2 : 1);
      },
      e);
}

namespace {

Index encoder_input_dim(const Encoder& e) {
  return std::visit(
      [](const auto& enc) -> Index {
        using T = std::decay_t<decltype(enc)>;
        if constexpr (std::is_same_v<T, ScfvcEncoder>)
          return enc.bases.dim();
        else if constexpr (std::is_same_v<T, HscfvcEncoder>)
          return enc.bases_d.dim();
        else
          return enc.model.dim();
      },
      e);
}

void check_encoder(const FeatureSet& fs, const Encoder& e) {
  fs.validate();
  require(fs.dim() == encoder_input_dim(e), "feature dimension " + std::to_string(fs.dim()) +
                                                " does not match the encoder's " +
                                                std::to_string(encoder_input_dim(e)));
  std::visit(
      [](const auto& enc) {
        using T = std::decay_t<decltype(enc)>;
        if constexpr (std::is_same_v<T, ScfvcEncoder>) {
          enc.mp.validate();
          require(enc.mp.k <= enc.bases.size(), "sparsity exceeds dictionary size");
        } else if constexpr (std::is_same_v<T, HscfvcEncoder>) {
          enc.mp.validate();
          enc.coder.validate();
          require(enc.coder.input_dim() == enc.bases_d.dim() && enc.coder.output_dim() == enc.bases_d.size(),
                  "supervised coder shape must be D x M1");
          require(enc.bases_r.dim() == enc.bases_d.dim(), "B_d and B_r must share the feature dimension");
          require(enc.mp.k1 <= enc.bases_d.size() && enc.mp.k2 <= enc.bases_r.size(),
                  "sparsity budget exceeds basis count");
        } else {
          enc.model.validate();
        }
      },
      e);
}

}  // namespace

std::vector<FisherBlock> pooled_blocks(const FeatureSet& fs, const Encoder& e) {
  check_encoder(fs, e);
  const Matrix& x = fs.features;
  const Index t = fs.size();
  return std::visit(
      [&](const auto& enc) -> std::vector<FisherBlock> {
        using T = std::decay_t<decltype(enc)>;
        if constexpr (std::is_same_v<T, ScfvcEncoder>) {
          Matrix residuals;
          const Matrix codes = sparse::mp_encode_rows(enc.bases, x, enc.mp.k, &residuals);
          return {FisherBlock{pooled_outer(residuals, codes, 1.0 / enc.mp.sigma2)}};
        } else if constexpr (std::is_same_v<T, HscfvcEncoder>) {
          const Matrix guidance = supcode::guidance_codes(enc.coder, x, enc.mp.k1);
          Matrix cd, cr, residuals;
          sparse::hybrid_mp_encode_rows(enc.bases_d, enc.bases_r, x, guidance, enc.mp, cd, cr, &residuals);
          const double inv = 1.0 / enc.mp.sigma2;
          return {FisherBlock{pooled_outer(residuals, cd, inv)}, FisherBlock{pooled_outer(residuals, cr, inv)}};
        } else {
          const auto& m = enc.model;
          const Index k = m.components();
          const Matrix gamma = gmm::responsibilities_rows(m, x);  // T x K, parallel over rows
          const Matrix sd = standard_deviations(m);
          Matrix g = Matrix::Zero(m.dim(), enc.variance_gradients ? 2 * k : k);
#pragma omp parallel for schedule(static)
          for (Index c = 0; c < k; ++c) {
            for (Index i = 0; i < t; ++i) {
              for (Index d = 0; d < m.dim(); ++d) {
                const double diff = x(i, d) - m.means(c, d);
                g(d, c) += mean_term(gamma(i, c), diff, sd(c, d));
                if (enc.variance_gradients) g(d, k + c) += var_term(gamma(i, c), diff, sd(c, d));
              }
            }
          }
          return {FisherBlock{std::move(g)}};
        }
      },
      e);
}

Vector finalize(std::vector<FisherBlock> pooled, double alpha) {
  Index total = 0;
  for (const auto& b : pooled) total += b.gradient.size();
  Vector out(total);
  Index at = 0;
  for (auto& b : pooled) {
    b.gradient = power_normalize_block(b.gradient, alpha);
    b = intra_normalize(std::move(b));
    out.segment(at, b.gradient.size()) = Eigen::Map<const Vector>(b.gradient.data(), b.gradient.size());
    at += b.gradient.size();
  }
  return out;
}

ImageSignature encode_image(const FeatureSet& fs, const Encoder& e) {
  return {finalize(pooled_blocks(fs, e)), encoder_id(e)};
}

ImageSignature encode_image_serial(const FeatureSet& fs, const Encoder& e) {
  check_encoder(fs, e);
  std::vector<FisherBlock> pooled = std::visit(
      [&](const auto& enc) -> std::vector<FisherBlock> {
        using T = std::decay_t<decltype(enc)>;
        std::vector<FisherBlock> first, second;
        for (Index i = 0; i < fs.size(); ++i) {
          const Vector x = fs.features.row(i).transpose();
          if constexpr (std::is_same_v<T, ScfvcEncoder>) {
            first.push_back(scfvc_encode(enc.bases, x, enc.mp));
          } else if constexpr (std::is_same_v<T, HscfvcEncoder>) {
            const Vector c = supcode::sparsify_top_k(supcode::sup_encode(enc.coder, x), enc.mp.k1);
            auto [gd, gr] = hscfvc_encode(enc.bases_d, enc.bases_r, x, c, enc.mp);
            first.push_back(std::move(gd));
            second.push_back(std::move(gr));
          } else {
            first.push_back(gmmfvc_encode(enc.model, x, enc.variance_gradients));
          }
        }
        std::vector<FisherBlock> out{pool_sum(first)};
        if (!second.empty()) out.push_back(pool_sum(second));
        return out;
      },
      e);
  return {finalize(std::move(pooled)), encoder_id(e)};
}

Matrix encode_images(const std::vector<FeatureSet>& images, const Encoder& e) {
  require(!images.empty(), "no images to encode");
  for (const auto& im : images) check_encoder(im, e);
  Matrix out(Index(images.size()), signature_dim(e));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < images.size(); ++i) out.row(Index(i)) = encode_image(images[i], e).values.transpose();
  return out;
}

}  // namespace cfv::fisher
