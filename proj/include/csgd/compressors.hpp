#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csgd/linalg.hpp"
#include "csgd/parallel.hpp"
#include "csgd/rng.hpp"

namespace csgd {

enum class CompressorKind : std::uint8_t {
  Identity = 0,
  RandomK = 1,
  TopK = 2,
  Sign = 3,
  Quantization = 4,
};

std::string to_string(CompressorKind kind);
/// Accepts "identity", "random_k", "top_k", "sign", "quantization".
CompressorKind compressor_kind_from_string(const std::string& name);

struct CompressorSpec {
  CompressorKind kind = CompressorKind::Identity;
  std::size_t d = 0;
  std::size_t k = 0;  // RandomK / TopK
  std::uint32_t s = 1; // Quantization levels

  static CompressorSpec identity(std::size_t d) { return {CompressorKind::Identity, d, d, 1}; }
  static CompressorSpec random_k(std::size_t d, std::size_t k) { return {CompressorKind::RandomK, d, k, 1}; }
  static CompressorSpec top_k(std::size_t d, std::size_t k) { return {CompressorKind::TopK, d, k, 1}; }
  static CompressorSpec sign(std::size_t d) { return {CompressorKind::Sign, d, 0, 1}; }
  static CompressorSpec quantization(std::size_t d, std::uint32_t s = 1) {
    return {CompressorKind::Quantization, d, 0, s};
  }

  /// Throws ParameterError unless d >= 1, 1 <= k <= d for sparsifiers, s >= 1.
  void validate() const;

  bool operator==(const CompressorSpec&) const = default;
};

/// Compression factor mu used by the planner. Identity 1, RandomK/TopK k/d,
/// Sign 1/d. Quantization is unbiased rather than contractive; it reports
/// 1/(1 + omega) with omega = min(d/s^2, sqrt(d)/s) its variance factor.
double compression_factor(const CompressorSpec& spec);

/// True exactly for Identity and RandomK: linear once the randomness is fixed.
bool is_linear(const CompressorSpec& spec);

/// Nominal bits per message. Quantization depends on the number of non-zero
/// levels; this reports the dense worst case, messages carry the actual size.
std::uint64_t message_cost_bits(const CompressorSpec& spec, int value_bits);

/// ceil(log2 n) for n >= 1, with ceil_log2(1) = 0.
int ceil_log2(std::uint64_t n);

/// Wire form of a compressed vector. decode() rebuilds the compressed vector
/// bit-exactly; to_bytes()/from_bytes() give the little-endian layout
///   u8 kind, u32 d, then
///   Identity:     d x f64
///   RandomK:      u64 seed, u64 stream, u64 counter, u32 k, k x f64
///                 (indices are regenerated from the shared stream)
///   TopK:         u32 k, k x (u32 index, f64 value)
///   Sign:         f64 scale, ceil(d/8) bytes of sign bits (bit set = negative)
///   Quantization: f64 norm, u32 s, u32 nnz, nnz x (u32 index, i32 signed level)
struct CompressedMessage {
  CompressorKind kind = CompressorKind::Identity;
  std::size_t d = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<std::int32_t> levels;
  std::vector<std::uint8_t> sign_bits;
  double scale = 0.0;
  std::uint32_t s = 1;
  // RandomK: position of the shared stream before the index draw.
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_stream = 0;
  std::uint64_t rng_counter = 0;
  std::uint64_t cost_bits = 0;

  ParamVector decode() const;
  std::vector<std::uint8_t> to_bytes() const;
  static CompressedMessage from_bytes(std::span<const std::uint8_t> bytes);
};

struct Compressed {
  ParamVector c;
  CompressedMessage msg;
};

/// C(x, theta~) with theta~ drawn from `rng`. Only RandomK and Quantization
/// consume randomness.
Compressed compress(const CompressorSpec& spec, const ParamVector& x, SeededRng& rng,
                    int value_bits = 64);
/// Same as compress().c without building a message.
ParamVector apply_compressor(const CompressorSpec& spec, const ParamVector& x, SeededRng& rng);

/// The k coordinates a RandomK compressor keeps, in draw order.
std::vector<std::uint32_t> random_k_indices(std::size_t d, std::size_t k, SeededRng& rng);
/// Quantized magnitude level*norm/s, shared by encoder and decoder.
double quantized_value(std::int32_t signed_level, double norm, std::uint32_t s);

using VectorSampler = std::function<void(SeededRng&, std::span<double>)>;
VectorSampler isotropic_gaussian_sampler();

struct FactorEstimate {
  double ratio = 0.0;      // mean of ||x - C(x)||^2 / ||x||^2
  double std_error = 0.0;  // of the mean
  std::size_t used = 0;
  std::size_t skipped = 0; // zero samples
};

/// Monte-Carlo estimate of E||x - C(x)||^2 / ||x||^2. Trial i draws both the
/// sample and the compressor randomness from its own stream of `seed`, so the
/// result is identical for either Exec.
FactorEstimate compression_factor_estimate(const CompressorSpec& spec, const VectorSampler& sampler,
                                           std::size_t trials, std::uint64_t seed,
                                           Exec exec = Exec::Serial);

} // namespace csgd
