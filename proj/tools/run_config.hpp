#pragma once

#include "cfv/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cfv::cli {

/// Bad command line or configuration; the CLI maps it to exit code 2.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class KeyType { integer, unsigned_integer, real, boolean, text, index_list };

struct KeySpec {
  KeyType type;
  double min = -1e300;  // inclusive bounds for numeric keys and list entries
  double max = 1e300;
  std::vector<std::string> choices;  // allowed values for text keys (empty = any)
};

/// The full key schema. Every key a command may read is listed here.
const std::map<std::string, KeySpec>& schema();

/// `key = value` lines, `#` starts a comment. Values are checked against the
/// schema when set, so a RunConfig only ever holds valid entries.
class RunConfig {
public:
  static RunConfig from_file(const std::filesystem::path& path);

  /// Adds or replaces one entry; `where` prefixes error messages.
  void set(const std::string& key, const std::string& value, const std::string& where = "");

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_text(const std::string& key, const std::string& fallback) const;
  std::vector<Index> get_list(const std::string& key, const std::vector<Index>& fallback) const;

private:
  const std::string* raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

}  // namespace cfv::cli
