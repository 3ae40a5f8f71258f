#include "cfv/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace cfv {

namespace fs = std::filesystem;

namespace {

class Writer {
public:
  explicit Writer(ModelType t) {
    buf_.append("FVCM", 4);
    u8(kModelFormatVersion);
    u8(static_cast<std::uint8_t>(t));
  }

  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

  void size(Index n) {
    require(n >= 0 && n <= 0xFFFFFFFFLL, "dimension does not fit the model container");
    u32(static_cast<std::uint32_t>(n));
  }
  void vector(const Vector& v) {
    size(v.size());
    for (Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void matrix(const Matrix& m) {
    size(m.rows());
    size(m.cols());
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw ArgumentError("write failed for '" + path.string() + "'");
  }

private:
  std::string buf_;
};

class Reader {
public:
  Reader(const fs::path& path, ModelType expected) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open '" + path_ + "'");
    buf_.assign(std::istreambuf_iterator<char>(in), {});
    const ModelType t = header();
    if (t != expected) {
      fail(5, std::string("expected a ") + model_type_name(expected) + " model, found " + model_type_name(t));
    }
  }

  ModelType header() {
    if (buf_.size() < 6) fail(buf_.size(), "truncated header");
    if (std::memcmp(buf_.data(), "FVCM", 4) != 0) fail(0, "bad magic, expected FVCM");
    if (static_cast<std::uint8_t>(buf_[4]) != kModelFormatVersion)
      fail(4, "unsupported format version " + std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(buf_[4]))));
    const auto tag = static_cast<std::uint8_t>(buf_[5]);
    if (tag < 1 || tag > 6) fail(5, "unknown model type tag " + std::to_string(tag));
    pos_ = 6;
    return static_cast<ModelType>(tag);
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64() {
    const std::size_t at = pos_;
    const double v = std::bit_cast<double>(u64());
    if (!std::isfinite(v)) fail(at, "non-finite value");
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  Vector vector() {
    const std::uint32_t n = u32();
    need(8ULL * n);
    Vector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
  Matrix matrix() {
    const std::uint32_t r = u32();
    const std::uint32_t c = u32();
    need(8ULL * r * c);
    Matrix m(r, c);
    for (std::uint32_t i = 0; i < r; ++i)
      for (std::uint32_t j = 0; j < c; ++j) m(i, j) = f64();
    return m;
  }

  void finish() const {
    if (pos_ != buf_.size()) fail(pos_, "trailing bytes after payload");
  }

  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw FormatError(path_ + ": byte " + std::to_string(at) + ": " + what);
  }

  // Wraps model validation failures as format errors at the current offset.
  template <class F>
  auto checked(F&& f) {
    try {
      return f();
    } catch (const ArgumentError& e) {
      fail(pos_, e.what());
    }
  }

private:
  void need(std::uint64_t n) const {
    if (buf_.size() - pos_ < n) fail(pos_, "truncated payload");
  }

  std::string path_;
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* model_type_name(ModelType t) {
  switch (t) {
    case ModelType::dictionary: return "dictionary";
    case ModelType::dictionary_pair: return "dictionary-pair";
    case ModelType::gmm: return "gmm";
    case ModelType::pca: return "pca";
    case ModelType::supervised_encoder: return "supervised-encoder";
    case ModelType::linear: return "linear";
  }
  return "unknown";
}

ModelType peek_model_type(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  char head[6] = {};
  in.read(head, 6);
  const auto got = in.gcount();
  if (got < 6) throw FormatError(path.string() + ": byte " + std::to_string(got) + ": truncated header");
  if (std::memcmp(head, "FVCM", 4) != 0) throw FormatError(path.string() + ": byte 0: bad magic, expected FVCM");
  if (static_cast<std::uint8_t>(head[4]) != kModelFormatVersion)
    throw FormatError(path.string() + ": byte 4: unsupported format version");
  const auto tag = static_cast<std::uint8_t>(head[5]);
  if (tag < 1 || tag > 6) throw FormatError(path.string() + ": byte 5: unknown model type tag");
  return static_cast<ModelType>(tag);
}

void save_model(const fs::path& path, const Dictionary& d) {
  Writer w(ModelType::dictionary);
  w.matrix(d.bases());
  w.save(path);
}

void save_model(const fs::path& path, const Dictionary& bases_d, const Dictionary& bases_r) {
  require(bases_d.dim() == bases_r.dim(), "dictionary pair must share the feature dimension");
  Writer w(ModelType::dictionary_pair);
  w.matrix(bases_d.bases());
  w.matrix(bases_r.bases());
  w.save(path);
}

void save_model(const fs::path& path, const gmm::GmmModel& m) {
  m.validate();
  Writer w(ModelType::gmm);
  w.vector(m.weights);
  w.matrix(m.means);
  w.matrix(m.variances);
  w.save(path);
}

void save_model(const fs::path& path, const PcaTransform& t) {
  Writer w(ModelType::pca);
  w.u8(t.whiten ? 1 : 0);
  w.vector(t.mean);
  w.matrix(t.projection);
  w.vector(t.eigenvalues);
  w.save(path);
}

void save_model(const fs::path& path, const supcode::SupervisedEncoder& e) {
  e.validate();
  Writer w(ModelType::supervised_encoder);
  w.matrix(e.projection);
  w.vector(e.bias);
  w.save(path);
}

void save_model(const fs::path& path, const classify::LinearModel& m) {
  m.validate();
  Writer w(ModelType::linear);
  w.size(Index(m.class_ids.size()));
  for (int id : m.class_ids) w.i32(id);
  w.matrix(m.weights);
  w.vector(m.bias);
  w.save(path);
}

Dictionary load_dictionary(const fs::path& path) {
  Reader r(path, ModelType::dictionary);
  Matrix b = r.matrix();
  r.finish();
  return r.checked([&] { return Dictionary(std::move(b)); });
}

std::pair<Dictionary, Dictionary> load_dictionary_pair(const fs::path& path) {
  Reader r(path, ModelType::dictionary_pair);
  Matrix bd = r.matrix();
  Matrix br = r.matrix();
  r.finish();
  return r.checked([&] {
    require(bd.rows() == br.rows(), "dictionary pair row mismatch");
    return std::pair{Dictionary(std::move(bd)), Dictionary(std::move(br))};
  });
}

gmm::GmmModel load_gmm(const fs::path& path) {
  Reader r(path, ModelType::gmm);
  gmm::GmmModel m;
  m.weights = r.vector();
  m.means = r.matrix();
  m.variances = r.matrix();
  r.finish();
  r.checked([&] {
    m.validate();
    return 0;
  });
  return m;
}

PcaTransform load_pca(const fs::path& path) {
  Reader r(path, ModelType::pca);
  PcaTransform t;
  t.whiten = r.u8() != 0;
  t.mean = r.vector();
  t.projection = r.matrix();
  t.eigenvalues = r.vector();
  r.finish();
  r.checked([&] {
    require(t.mean.size() == t.projection.rows() && t.eigenvalues.size() == t.projection.cols(),
            "PCA shape mismatch");
    return 0;
  });
  return t;
}

supcode::SupervisedEncoder load_supervised_encoder(const fs::path& path) {
  Reader r(path, ModelType::supervised_encoder);
  supcode::SupervisedEncoder e;
  e.projection = r.matrix();
  e.bias = r.vector();
  r.finish();
  r.checked([&] {
    e.validate();
    return 0;
  });
  return e;
}

classify::LinearModel load_linear_model(const fs::path& path) {
  Reader r(path, ModelType::linear);
  classify::LinearModel m;
  const std::uint32_t c = r.u32();
  for (std::uint32_t i = 0; i < c; ++i) m.class_ids.push_back(r.i32());
  m.weights = r.matrix();
  m.bias = r.vector();
  r.finish();
  r.checked([&] {
    m.validate();
    return 0;
  });
  return m;
}

}  // namespace cfv
