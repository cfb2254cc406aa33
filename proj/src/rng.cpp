#include "csgd/rng.hpp"

#include <cmath>

namespace csgd {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed + kGolden) ^ (stream * kGolden + 1))) {}

std::uint64_t SeededRng::stream_id(Purpose purpose, std::uint64_t worker,
                                   std::uint64_t iteration) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(purpose) * kGolden);
  h = mix64(h ^ (worker + 0x632BE59BD9B4E019ULL));
  h = mix64(h ^ (iteration + 0x8CB92BA72F3D8DD7ULL));
  return h;
}

SeededRng SeededRng::at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  SeededRng rng(seed, stream);
  rng.counter_ = counter;
  return rng;
}

std::uint64_t SeededRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

namespace {
__extension__ typedef unsigned __int128 u128;
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  // Lemire's nearly-divisionless method.
  u128 m = static_cast<u128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

} // namespace csgd
