#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

namespace cfv::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

bool parse_list(const std::string& s, std::vector<Index>& out) {
  out.clear();
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    long long v = 0;
    if (!parse_number(item, v)) return false;
    out.push_back(Index(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return !out.empty();
}

KeySpec count(double min = 1, double max = 1e9) { return {KeyType::integer, min, max, {}}; }
KeySpec real(double min, double max) { return {KeyType::real, min, max, {}}; }
KeySpec flag() { return {KeyType::boolean, 0, 0, {}}; }
KeySpec list(double min = 1) { return {KeyType::index_list, min, 1e9, {}}; }

}  // namespace

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> keys = {
      {"seed", {KeyType::unsigned_integer, 0, 0, {}}},
      {"threads", count(0, 4096)},

      {"synth.model", {KeyType::text, 0, 0, {"I", "II"}}},
      {"synth.format", {KeyType::text, 0, 0, {"binary", "csv"}}},
      {"synth.classes", count(2, 1000)},
      {"synth.dim", count()},
      {"synth.bases_per_class", count()},
      {"synth.shared_bases", count(0)},
      {"synth.active", count()},
      {"synth.laplace_scale", real(1e-12, 1e12)},
      {"synth.noise_std", real(0, 1e12)},
      {"synth.features_per_image", count()},
      {"synth.train_per_class", count()},
      {"synth.test_per_class", count(0)},
      {"synth.m1", count()},
      {"synth.m2", count()},
      {"synth.prior_active", count()},
      {"synth.prior_scale", real(1e-12, 1e12)},
      {"synth.class_feature_fraction", real(0, 1)},
      {"synth.basis_perturbation", real(0, 1e12)},
      {"synth.lambda1", real(1e-12, 1e12)},
      {"synth.lambda2", real(1e-12, 1e12)},
      {"synth.lambda3", real(1e-12, 1e12)},
      {"synth.residual_active", count(0)},
      {"synth.metropolis_sweeps", count(0)},

      {"dict.m", count()},
      {"dict.k", count(0)},
      {"dict.iters", count(0)},
      {"dict.ridge", real(0, 1e12)},
      {"dict.train_features", count(0)},

      {"hybrid.m2", count()},
      {"hybrid.k1", count(0)},
      {"hybrid.k2", count(0)},
      {"hybrid.lambda", real(0, 1e12)},
      {"hybrid.iters", count(0)},
      {"hybrid.ridge", real(0, 1e12)},
      {"hybrid.train_features", count(0)},

      {"gmm.k", count()},
      {"gmm.iters", count(0)},
      {"gmm.tol", real(0, 1e12)},
      {"gmm.var_floor", real(1e-300, 1e12)},
      {"gmm.train_features", count(0)},

      {"pca.dim", count()},
      {"pca.whiten", flag()},
      {"pca.train_features", count(0)},

      {"sup.m1", count()},
      {"sup.lr", real(0, 1e12)},
      {"sup.epochs", count(0)},
      {"sup.batch", count()},
      {"sup.l2", real(0, 1e12)},
      {"sup.power_eps", real(1e-300, 1e12)},

      {"encode.k", count(0)},
      {"encode.k1", count(0)},
      {"encode.k2", count(0)},
      {"encode.lambda", real(0, 1e12)},
      {"encode.sigma2", real(1e-300, 1e300)},
      {"encode.variance_gradients", flag()},

      {"linear.l2", real(0, 1e12)},
      {"linear.epochs", count(0)},
      {"linear.lr", real(0, 1e12)},

      {"bench.dims", list()},
      {"bench.gmm_sizes", list()},
      {"bench.basis_counts", list()},
      {"bench.true_bases", count()},
      {"bench.active", count()},
      {"bench.laplace_scale", real(1e-12, 1e12)},
      {"bench.noise_std", real(0, 1e12)},
      {"bench.train_features", count()},
      {"bench.test_features", count()},
      {"bench.sparsity", count(0)},
      {"bench.gmm_iters", count(0)},
      {"bench.dict_iters", count(0)},
  };
  return keys;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected key = value");
    cfg.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)), where);
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
  const auto it = schema().find(key);
  if (it == schema().end()) throw UsageError(where + "unknown config key '" + key + "'");
  const KeySpec& spec = it->second;
  auto bad = [&](const std::string& why) { return UsageError(where + "config key '" + key + "': " + why); };
  switch (spec.type) {
    case KeyType::integer: {
      long long v = 0;
      if (!parse_number(value, v)) throw bad("expected an integer, got '" + value + "'");
      if (double(v) < spec.min || double(v) > spec.max) throw bad("value " + value + " out of range");
      break;
    }
    case KeyType::unsigned_integer: {
      std::uint64_t v = 0;
      if (!parse_number(value, v)) throw bad("expected an unsigned integer, got '" + value + "'");
      break;
    }
    case KeyType::real: {
      double v = 0;
      if (!parse_number(value, v) || !std::isfinite(v)) throw bad("expected a number, got '" + value + "'");
      if (v < spec.min || v > spec.max) throw bad("value " + value + " out of range");
      break;
    }
    case KeyType::boolean: {
      bool v = false;
      if (!parse_bool(value, v)) throw bad("expected true or false, got '" + value + "'");
      break;
    }
    case KeyType::text:
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end())
        throw bad("unsupported value '" + value + "'");
      break;
    case KeyType::index_list: {
      std::vector<Index> v;
      if (!parse_list(value, v)) throw bad("expected a comma-separated list of integers, got '" + value + "'");
      for (Index x : v)
        if (double(x) < spec.min) throw bad("list entry " + std::to_string(x) + " out of range");
      break;
    }
  }
  values_[key] = value;
}

const std::string* RunConfig::raw(const std::string& key) const {
  if (!schema().count(key)) throw std::logic_error("config key '" + key + "' missing from the schema");
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
  const auto* s = raw(key);
  long long v = fallback;
  if (s) parse_number(*s, v);
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* s = raw(key);
  std::uint64_t v = fallback;
  if (s) parse_number(*s, v);
  return v;
}

double RunConfig::get_real(const std::string& key, double fallback) const {
  const auto* s = raw(key);
  double v = fallback;
  if (s) parse_number(*s, v);
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto* s = raw(key);
  bool v = fallback;
  if (s) parse_bool(*s, v);
  return v;
}

std::string RunConfig::get_text(const std::string& key, const std::string& fallback) const {
  const auto* s = raw(key);
  return s ? *s : fallback;
}

std::vector<Index> RunConfig::get_list(const std::string& key, const std::vector<Index>& fallback) const {
  const auto* s = raw(key);
  if (!s) return fallback;
  std::vector<Index> v;
  parse_list(*s, v);
  return v;
}

}  // namespace cfv::cli
