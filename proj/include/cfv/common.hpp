#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace cfv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad caller input: wrong dimensions, out-of-range hyperparameters.
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file contents. The message names the byte offset or line.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

/// Sets the OpenMP worker count used by the parallel kernels. n <= 0 keeps the
/// runtime default.
void set_num_threads(int n);
int num_threads();

/// Derives an independent stream seed from (base, index). SplitMix64 finalizer,
/// so neighbouring indices give uncorrelated engines.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over raw bytes; used for model fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ULL);
std::uint64_t fingerprint(const Matrix& m, std::uint64_t h = 14695981039346656037ULL);

bool all_finite(const Matrix& m);

}  // namespace cfv
