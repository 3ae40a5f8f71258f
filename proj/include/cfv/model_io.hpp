#pragma once

#include "cfv/classify.hpp"
#include "cfv/dataio.hpp"
#include "cfv/dictionary.hpp"
#include "cfv/gmm.hpp"
#include "cfv/supcode.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>

namespace cfv {

/// FVCM container: "FVCM", version byte, type tag byte, payload. Payload
/// matrices are u32 LE rows, u32 LE cols, then rows*cols f64 LE values in
/// row-major order; vectors are u32 LE length then f64 LE values. See
/// docs/FORMATS.md for the per-type layouts.
enum class ModelType : std::uint8_t {
  dictionary = 1,
  dictionary_pair = 2,
  gmm = 3,
  pca = 4,
  supervised_encoder = 5,
  linear = 6,
};

inline constexpr std::uint8_t kModelFormatVersion = 1;

const char* model_type_name(ModelType t);

/// Reads only the header; throws FormatError on a bad magic or version.
ModelType peek_model_type(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const Dictionary& d);
void save_model(const std::filesystem::path& path, const Dictionary& bases_d, const Dictionary& bases_r);
void save_model(const std::filesystem::path& path, const gmm::GmmModel& m);
void save_model(const std::filesystem::path& path, const PcaTransform& t);
void save_model(const std::filesystem::path& path, const supcode::SupervisedEncoder& e);
void save_model(const std::filesystem::path& path, const classify::LinearModel& m);

Dictionary load_dictionary(const std::filesystem::path& path);
std::pair<Dictionary, Dictionary> load_dictionary_pair(const std::filesystem::path& path);
gmm::GmmModel load_gmm(const std::filesystem::path& path);
PcaTransform load_pca(const std::filesystem::path& path);
supcode::SupervisedEncoder load_supervised_encoder(const std::filesystem::path& path);
classify::LinearModel load_linear_model(const std::filesystem::path& path);

}  // namespace cfv
