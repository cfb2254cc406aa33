#pragma once

#include <cstdint>

namespace csgd {

/// Consumers of randomness. Each (purpose, worker, iteration) triple names an
/// independent stream so any party can regenerate a draw from the seed alone.
enum class Purpose : std::uint64_t {
  StochasticGradient = 1, // theta_t, per worker
  CompressorShared = 2,   // compressor randomness, shared by all workers
  ArtificialNoise = 3,    // xi_t, shared by all workers
  InitialPoint = 4,
  Trial = 5,
  Downlink = 6,
  Sampler = 7,
  Auxiliary = 8,
};

/// Counter-based generator: output n is a bijective 64-bit mix of (key, n),
/// where key is derived from (seed, stream). Identical on every platform.
class SeededRng {
public:
  SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  static std::uint64_t stream_id(Purpose purpose, std::uint64_t worker, std::uint64_t iteration);
  static SeededRng for_stream(std::uint64_t seed, Purpose purpose, std::uint64_t worker,
                              std::uint64_t iteration) {
    return SeededRng(seed, stream_id(purpose, worker, iteration));
  }
  /// Generator positioned after `counter` draws of the (seed, stream) sequence.
  static SeededRng at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Uniform integer in [0, n), n > 0, without modulo bias.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  /// Number of 64-bit words drawn so far.
  std::uint64_t counter() const noexcept { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

} // namespace csgd
