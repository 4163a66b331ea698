#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tdrc {

using Complex = std::complex<double>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using VectorXcd = Vector<Complex>;
using MatrixXd = Matrix<double>;

// Error hierarchy. Everything derives from std::runtime_error so callers
// that only care about "did it work" can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain an operation accepts.
struct DomainError : Error {
  using Error::Error;
};

/// Malformed text input; `line` is 1-based.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};

/// Out-of-range sample request.
struct IndexError : Error {
  using Error::Error;
};

struct RankDeficiencyError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};

/// Counter-based seed derivation (SplitMix64 finalizer over a combined key).
/// Streams derived from distinct (master, stream, index) triples are
/// independent of evaluation order.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ stream) ^ index);
}

// Named seed streams.
enum class SeedStream : std::uint64_t {
  mask = 1,
  noise = 2,
  trial = 3,
  sweep_point = 4,
  probe = 5,
  dataset = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                    std::uint64_t index = 0) {
  return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

}  // namespace tdrc
