#include "cfv/dataio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cfv {

namespace fs = std::filesystem;

void FeatureSet::validate() const {
  require(features.rows() >= 1, "feature set '" + image_id + "' has no rows");
  require(features.cols() >= 1, "feature set '" + image_id + "' has zero dimension");
  require(features.allFinite(), "feature set '" + image_id + "' contains non-finite values");
}

FeatureFormat format_from_path(const fs::path& path) {
  return path.extension() == ".csv" ? FeatureFormat::csv : FeatureFormat::binary;
}

namespace {

constexpr std::array<char, 4> kFeatureMagic = {'F', 'V', 'C', '1'};

std::uint32_t load_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

void store_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

FeatureSet read_binary(const fs::path& path) {
  const std::string buf = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const std::string where = path.string() + ": byte ";
  if (buf.size() < 12) throw FormatError(where + std::to_string(buf.size()) + ": truncated header");
  if (std::memcmp(buf.data(), kFeatureMagic.data(), 4) != 0) throw FormatError(where + "0: bad magic, expected FVC1");
  const std::uint32_t rows = load_u32(p + 4);
  const std::uint32_t cols = load_u32(p + 8);
  if (rows == 0) throw FormatError(where + "4: row count is zero");
  if (cols == 0) throw FormatError(where + "8: column count is zero");
  const std::uint64_t need = 12 + 4ULL * rows * cols;
  if (buf.size() != need) {
    throw FormatError(where + std::to_string(std::min<std::uint64_t>(buf.size(), need)) +
                      ": payload size mismatch, expected " + std::to_string(need) + " bytes, found " +
                      std::to_string(buf.size()));
  }
  FeatureSet out;
  out.image_id = path.stem().string();
  out.features.resize(rows, cols);
  std::size_t off = 12;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, off += 4) {
      const float v = std::bit_cast<float>(load_u32(p + off));
      if (!std::isfinite(v)) throw FormatError(where + std::to_string(off) + ": non-finite value");
      out.features(r, c) = v;
    }
  }
  return out;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

FeatureSet read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    std::vector<double> row;
    for (auto tok : split_commas(body)) {
      tok = trim(tok);
      if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": cannot parse '" +
                          std::string(tok) + "'");
      }
      if (!std::isfinite(v)) {
        throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": non-finite value");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": expected " +
                        std::to_string(rows.front().size()) + " columns, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": no feature rows");
  FeatureSet out;
  out.image_id = path.stem().string();
  out.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) out.features(Index(r), Index(c)) = rows[r][c];
  return out;
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("write failed for '" + path.string() + "'");
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

FeatureSet read_feature_set(const fs::path& path, FeatureFormat format) {
  return format == FeatureFormat::binary ? read_binary(path) : read_csv(path);
}

FeatureSet read_feature_set(const fs::path& path) { return read_feature_set(path, format_from_path(path)); }

void write_feature_set(const fs::path& path, const Matrix& rows, FeatureFormat format) {
  require(rows.rows() >= 1 && rows.cols() >= 1, "cannot write an empty feature matrix");
  require(rows.allFinite(), "cannot write non-finite features");
  std::string bytes;
  if (format == FeatureFormat::binary) {
    require(rows.rows() <= 0xFFFFFFFFLL && rows.cols() <= 0xFFFFFFFFLL, "feature matrix too large for FVC1");
    bytes.reserve(12 + 4 * static_cast<std::size_t>(rows.size()));
    bytes.append(kFeatureMagic.data(), 4);
    store_u32(bytes, static_cast<std::uint32_t>(rows.rows()));
    store_u32(bytes, static_cast<std::uint32_t>(rows.cols()));
    for (Index r = 0; r < rows.rows(); ++r)
      for (Index c = 0; c < rows.cols(); ++c)
        store_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(rows(r, c))));
  } else {
    for (Index r = 0; r < rows.rows(); ++r) {
      for (Index c = 0; c < rows.cols(); ++c) {
        if (c) bytes.push_back(',');
        append_double(bytes, rows(r, c));
      }
      bytes.push_back('\n');
    }
  }
  write_atomic(path, bytes);
}

void write_feature_set(const fs::path& path, const FeatureSet& fs, FeatureFormat format) {
  write_feature_set(path, fs.features, format);
}

Matrix stack_features(const std::vector<FeatureSet>& sets) {
  require(!sets.empty(), "no feature sets to stack");
  const Index d = sets.front().dim();
  Index total = 0;
  for (const auto& s : sets) {
    require(s.dim() == d, "feature dimension mismatch while stacking");
    total += s.size();
  }
  Matrix out(total, d);
  Index at = 0;
  for (const auto& s : sets) {
    out.middleRows(at, s.size()) = s.features;
    at += s.size();
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open manifest '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (lineno == 1) {
      if (body != "image_id,path,label,split")
        throw FormatError(path.string() + ": line 1: expected header image_id,path,label,split");
      continue;
    }
    const auto cols = split_commas(body);
    if (cols.size() != 4)
      throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": expected 4 columns");
    ManifestEntry e;
    e.image_id = std::string(trim(cols[0]));
    e.path = std::string(trim(cols[1]));
    const auto lab = trim(cols[2]);
    const auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), e.label);
    if (ec != std::errc() || ptr != lab.data() + lab.size())
      throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": bad label");
    e.split = std::string(trim(cols[3]));
    out.push_back(std::move(e));
  }
  if (out.empty()) throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": manifest is empty");
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string bytes = "image_id,path,label,split\n";
  for (const auto& e : entries) {
    bytes += e.image_id + "," + e.path + "," + std::to_string(e.label) + "," + e.split + "\n";
  }
  write_atomic(path, bytes);
}

std::vector<FeatureSet> load_split(const fs::path& manifest, const std::string& split) {
  const auto base = manifest.parent_path();
  std::vector<FeatureSet> out;
  for (const auto& e : read_manifest(manifest)) {
    if (!split.empty() && e.split != split) continue;
    auto fs = read_feature_set(base / e.path);
    fs.image_id = e.image_id;
    if (e.label >= 0) fs.label = e.label;
    out.push_back(std::move(fs));
  }
  if (out.empty()) throw ArgumentError("manifest '" + manifest.string() + "' has no entries for split '" + split + "'");
  return out;
}

// -- PCA ----------------------------------------------------------------------

PcaTransform fit_pca(const Matrix& samples, Index target_dim, bool whiten) {
  const Index n = samples.rows();
  const Index d = samples.cols();
  require(d >= 1, "PCA needs at least one input dimension");
  require(target_dim >= 1 && target_dim <= d, "PCA target dimension must lie in [1, D]");
  require(n >= target_dim && n >= 2, "PCA needs at least max(2, target_dim) samples");
  require(samples.allFinite(), "PCA samples must be finite");

  PcaTransform t;
  t.whiten = whiten;
  t.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - t.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / double(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success) throw ArgumentError("PCA eigendecomposition failed");
  // Eigen returns ascending eigenvalues; take the top block in reverse.
  t.projection.resize(d, target_dim);
  t.eigenvalues.resize(target_dim);
  for (Index j = 0; j < target_dim; ++j) {
    const Index src = d - 1 - j;
    Vector v = es.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    t.projection.col(j) = v;
    t.eigenvalues(j) = std::max(0.0, es.eigenvalues()(src));
  }
  return t;
}

Matrix apply_pca(const PcaTransform& t, const Matrix& rows) {
  require(rows.cols() == t.input_dim(), "PCA input dimension mismatch: expected " +
                                            std::to_string(t.input_dim()) + ", got " + std::to_string(rows.cols()));
  Matrix out = (rows.rowwise() - t.mean.transpose()) * t.projection;
  if (t.whiten) {
    for (Index j = 0; j < out.cols(); ++j) {
      const double s = std::sqrt(t.eigenvalues(j));
      if (s > 0) out.col(j) /= s;
    }
  }
  return out;
}

FeatureSet apply_pca(const PcaTransform& t, const FeatureSet& fs) {
  FeatureSet out;
  out.image_id = fs.image_id;
  out.label = fs.label;
  out.features = apply_pca(t, fs.features);
  return out;
}

}  // namespace cfv
