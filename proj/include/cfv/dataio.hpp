#pragma once

#include "cfv/common.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cfv {

/// One image's bag of local features, one feature per row (T x D).
struct FeatureSet {
  Matrix features;
  std::string image_id;
  std::optional<int> label;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  /// Throws ArgumentError unless T >= 1, D >= 1 and every entry is finite.
  void validate() const;
};

enum class FeatureFormat { binary, csv };

/// Picks the format from the extension: ".csv" is csv, anything else binary.
FeatureFormat format_from_path(const std::filesystem::path& path);

/// Binary layout: "FVC1", u32 LE rows, u32 LE cols, rows*cols f32 LE values,
/// row-major. image_id is set to the file stem.
FeatureSet read_feature_set(const std::filesystem::path& path, FeatureFormat format);
FeatureSet read_feature_set(const std::filesystem::path& path);

void write_feature_set(const std::filesystem::path& path, const Matrix& rows, FeatureFormat format);
void write_feature_set(const std::filesystem::path& path, const FeatureSet& fs, FeatureFormat format);

/// Stacks the rows of several feature sets; all must share D.
Matrix stack_features(const std::vector<FeatureSet>& sets);

// -- Dataset manifests --------------------------------------------------------

/// One row of a manifest.csv: `image_id,path,label,split`. Paths are stored
/// relative to the manifest's directory.
struct ManifestEntry {
  std::string image_id;
  std::string path;
  int label = -1;
  std::string split;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Loads every entry of `manifest` whose split matches (empty split = all).
std::vector<FeatureSet> load_split(const std::filesystem::path& manifest, const std::string& split);

// -- PCA ----------------------------------------------------------------------

struct PcaTransform {
  Vector mean;          // D
  Matrix projection;    // D x D', orthonormal columns
  Vector eigenvalues;   // D', non-increasing, >= 0
  bool whiten = false;  // divide each output coordinate by sqrt(eigenvalue)

  Index input_dim() const { return projection.rows(); }
  Index output_dim() const { return projection.cols(); }
};

/// Fits the top-`target_dim` principal directions of `samples` (N x D).
/// The covariance uses the (N-1) denominator; each eigenvector is signed so
/// that its largest-magnitude entry is positive.
PcaTransform fit_pca(const Matrix& samples, Index target_dim, bool whiten = false);

/// Maps each row x to projection^T (x - mean), optionally whitened.
Matrix apply_pca(const PcaTransform& t, const Matrix& rows);
FeatureSet apply_pca(const PcaTransform& t, const FeatureSet& fs);

}  // namespace cfv
