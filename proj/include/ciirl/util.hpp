#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ciirl {

/// Numerically stable log(sum(exp(x))) over a span.
double logsumexp(std::span<const double> xs);

/// Deterministic 64-bit PRNG (xoshiro256**) with pinned sampling routines.
///
/// The distribution helpers below avoid std::*_distribution, whose output
/// is implementation-defined, so streams are stable across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  int uniform_int(int n);
  /// Sample an index from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights);

  /// Derive an independent stream from a master seed and a stream id.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

 private:
  std::uint64_t state_[4];  // xoshiro256** internals keep this header light
  std::uint64_t splitmix_;
};

double mean(std::span<const double> xs);
/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 values.
double sample_stddev(std::span<const double> xs);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Shortest exact decimal representation of a double ("%.17g" fallback).
std::string format_double(double x);

/// Write a file atomically: temp file in the same directory, then rename.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

/// CRC-32 (zlib) of a byte string, as 8 lowercase hex digits.
std::string crc32_hex(const std::string& bytes);

/// Log verbosity from the CI_IRL_LOG environment variable:
/// "quiet"/"0" silences, "debug"/"2" is chatty, anything else is info.
int log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace ciirl
