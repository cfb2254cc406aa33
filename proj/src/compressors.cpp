#include "csgd/compressors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "csgd/errors.hpp"

namespace csgd {

namespace {

void check_value_bits(int value_bits) {
  if (value_bits != 32 && value_bits != 64) {
    throw ParameterError("value_bits must be 32 or 64, got " + std::to_string(value_bits));
  }
}

void check_dim(const CompressorSpec& spec, const ParamVector& x) {
  if (x.dim() != spec.d) {
    throw ParameterError("compress: vector has dimension " + std::to_string(x.dim()) +
                         ", compressor expects " + std::to_string(spec.d));
  }
}

// TopK order: larger magnitude first, lower index on ties.
std::vector<std::uint32_t> top_k_indices(const ParamVector& x, std::size_t k) {
  std::vector<std::uint32_t> idx(x.dim());
  std::iota(idx.begin(), idx.end(), 0u);
  auto before = [&x](std::uint32_t a, std::uint32_t b) {
    const double fa = std::abs(x[a]);
    const double fb = std::abs(x[b]);
    return fa != fb ? fa > fb : a < b;
  };
  if (k < idx.size()) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

class Writer {
public:
  template <class T>
  void put(T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > in_.size()) {
      throw ParameterError("CompressedMessage: truncated payload");
    }
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

} // namespace

std::string to_string(CompressorKind kind) {
  switch (kind) {
  case CompressorKind::Identity:
    return "identity";
  case CompressorKind::RandomK:
    return "random_k";
  case CompressorKind::TopK:
    return "top_k";
  case CompressorKind::Sign:
    return "sign";
  case CompressorKind::Quantization:
    return "quantization";
  }
  return "unknown";
}

CompressorKind compressor_kind_from_string(const std::string& name) {
  for (auto k : {CompressorKind::Identity, CompressorKind::RandomK, CompressorKind::TopK,
                 CompressorKind::Sign, CompressorKind::Quantization}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ParameterError("unknown compressor kind '" + name + "'");
}

void CompressorSpec::validate() const {
  if (d == 0) {
    throw ParameterError("compressor dimension must be positive");
  }
  if ((kind == CompressorKind::RandomK || kind == CompressorKind::TopK) && (k < 1 || k > d)) {
    throw ParameterError(to_string(kind) + ": k must lie in [1, d], got k=" + std::to_string(k) +
                         " d=" + std::to_string(d));
  }
  if (kind == CompressorKind::Quantization && s < 1) {
    throw ParameterError("quantization: s must be positive");
  }
}

double compression_factor(const CompressorSpec& spec) {
  spec.validate();
  const double d = static_cast<double>(spec.d);
  switch (spec.kind) {
  case CompressorKind::Identity:
    return 1.0;
  case CompressorKind::RandomK:
  case CompressorKind::TopK:
    return static_cast<double>(spec.k) / d;
  case CompressorKind::Sign:
    return 1.0 / d;
  case CompressorKind::Quantization: {
    const double s = spec.s;
    const double omega = std::min(d / (s * s), std::sqrt(d) / s);
    return 1.0 / (1.0 + omega);
  }
  }
  return 1.0;
}

bool is_linear(const CompressorSpec& spec) {
  return spec.kind == CompressorKind::Identity || spec.kind == CompressorKind::RandomK;
}

int ceil_log2(std::uint64_t n) {
  if (n <= 1) {
    return 0;
  }
  return 64 - std::countl_zero(n - 1);
}

std::uint64_t message_cost_bits(const CompressorSpec& spec, int value_bits) {
  spec.validate();
  check_value_bits(value_bits);
  const std::uint64_t vb = static_cast<std::uint64_t>(value_bits);
  const std::uint64_t d = spec.d;
  switch (spec.kind) {
  case CompressorKind::Identity:
    return d * vb;
  case CompressorKind::RandomK:
    return spec.k * vb;
  case CompressorKind::TopK:
    return spec.k * (vb + static_cast<std::uint64_t>(ceil_log2(d)));
  case CompressorKind::Sign:
    return d + vb;
  case CompressorKind::Quantization:
    return d * static_cast<std::uint64_t>(ceil_log2(d) + ceil_log2(spec.s)) + vb;
  }
  return 0;
}

std::vector<std::uint32_t> random_k_indices(std::size_t d, std::size_t k, SeededRng& rng) {
  std::vector<std::uint32_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(d - i);
    std::swap(perm[i], perm[j]);
  }
  perm.resize(k);
  return perm;
}

double quantized_value(std::int32_t signed_level, double norm, std::uint32_t s) {
  const double mag = static_cast<double>(std::abs(signed_level)) * norm / static_cast<double>(s);
  return signed_level < 0 ? -mag : mag;
}

Compressed compress(const CompressorSpec& spec, const ParamVector& x, SeededRng& rng,
                    int value_bits) {
  spec.validate();
  check_dim(spec, x);
  check_value_bits(value_bits);
  const std::size_t d = spec.d;
  const auto vb = static_cast<std::uint64_t>(value_bits);

  Compressed out{ParamVector(d), CompressedMessage{}};
  ParamVector& c = out.c;
  CompressedMessage& msg = out.msg;
  msg.kind = spec.kind;
  msg.d = d;

  switch (spec.kind) {
  case CompressorKind::Identity:
    c = x;
    msg.values = x.values();
    msg.cost_bits = d * vb;
    break;

  case CompressorKind::RandomK: {
    msg.rng_seed = rng.seed();
    msg.rng_stream = rng.stream();
    msg.rng_counter = rng.counter();
    const auto idx = random_k_indices(d, spec.k, rng);
    msg.values.reserve(idx.size());
    for (auto i : idx) {
      c[i] = x[i];
      msg.values.push_back(x[i]);
    }
    msg.cost_bits = spec.k * vb;
    break;
  }

  case CompressorKind::TopK: {
    msg.indices = top_k_indices(x, spec.k);
    msg.values.reserve(msg.indices.size());
    for (auto i : msg.indices) {
      c[i] = x[i];
      msg.values.push_back(x[i]);
    }
    msg.cost_bits = spec.k * (vb + static_cast<std::uint64_t>(ceil_log2(d)));
    break;
  }

  case CompressorKind::Sign: {
    // sign(0) = +1; a zero vector has scale 0 and maps to zero.
    msg.scale = norm1(x.span()) / static_cast<double>(d);
    msg.sign_bits.assign((d + 7) / 8, 0);
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] < 0.0) {
        msg.sign_bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        c[i] = -msg.scale;
      } else {
        c[i] = msg.scale;
      }
    }
    msg.cost_bits = d + vb;
    break;
  }

  case CompressorKind::Quantization: {
    const double nrm = norm(x);
    msg.scale = nrm;
    msg.s = spec.s;
    if (nrm > 0.0) {
      const double s = spec.s;
      for (std::size_t i = 0; i < d; ++i) {
        // One uniform per coordinate keeps the stream position data-independent.
        const double u = rng.uniform();
        const double a = std::abs(x[i]) * s / nrm;
        double level = std::floor(a);
        if (u < a - level) {
          level += 1.0;
        }
        level = std::min(level, s);
        if (level == 0.0) {
          continue;
        }
        const auto lv = static_cast<std::int32_t>(level);
        const std::int32_t signed_level = x[i] < 0.0 ? -lv : lv;
        msg.indices.push_back(static_cast<std::uint32_t>(i));
        msg.levels.push_back(signed_level);
        c[i] = quantized_value(signed_level, nrm, spec.s);
      }
    }
    msg.cost_bits = msg.indices.size() *
                        static_cast<std::uint64_t>(ceil_log2(d) + ceil_log2(spec.s)) +
                    vb;
    break;
  }
  }
  return out;
}

ParamVector apply_compressor(const CompressorSpec& spec, const ParamVector& x, SeededRng& rng) {
  return compress(spec, x, rng).c;
}

ParamVector CompressedMessage::decode() const {
  ParamVector c(d);
  switch (kind) {
  case CompressorKind::Identity:
    if (values.size() != d) {
      throw ParameterError("CompressedMessage: identity payload size mismatch");
    }
    for (std::size_t i = 0; i < d; ++i) {
      c[i] = values[i];
    }
    break;
  case CompressorKind::RandomK: {
    SeededRng rng = SeededRng::at(rng_seed, rng_stream, rng_counter);
    const auto idx = random_k_indices(d, values.size(), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      c[idx[j]] = values[j];
    }
    break;
  }
  case CompressorKind::TopK:
    if (indices.size() != values.size()) {
      throw ParameterError("CompressedMessage: top_k index/value count mismatch");
    }
    for (std::size_t j = 0; j < indices.size(); ++j) {
      c[indices[j]] = values[j];
    }
    break;
  case CompressorKind::Sign:
    for (std::size_t i = 0; i < d; ++i) {
      const bool neg = (sign_bits[i / 8] >> (i % 8)) & 1u;
      c[i] = neg ? -scale : scale;
    }
    break;
  case CompressorKind::Quantization:
    for (std::size_t j = 0; j < indices.size(); ++j) {
      c[indices[j]] = quantized_value(levels[j], scale, s);
    }
    break;
  }
  return c;
}

std::vector<std::uint8_t> CompressedMessage::to_bytes() const {
  Writer w;
  w.put(static_cast<std::uint8_t>(kind));
  w.put(static_cast<std::uint32_t>(d));
  switch (kind) {
  case CompressorKind::Identity:
    for (double v : values) {
      w.put(v);
    }
    break;
  case CompressorKind::RandomK:
    w.put(rng_seed);
    w.put(rng_stream);
    w.put(rng_counter);
    w.put(static_cast<std::uint32_t>(values.size()));
    for (double v : values) {
      w.put(v);
    }
    break;
  case CompressorKind::TopK:
    w.put(static_cast<std::uint32_t>(values.size()));
    for (std::size_t j = 0; j < values.size(); ++j) {
      w.put(indices[j]);
      w.put(values[j]);
    }
    break;
  case CompressorKind::Sign:
    w.put(scale);
    for (auto b : sign_bits) {
      w.put(b);
    }
    break;
  case CompressorKind::Quantization:
    w.put(scale);
    w.put(s);
    w.put(static_cast<std::uint32_t>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
      w.put(indices[j]);
      w.put(levels[j]);
    }
    break;
  }
  return std::move(w.out);
}

CompressedMessage CompressedMessage::from_bytes(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  CompressedMessage m;
  const auto kind = r.get<std::uint8_t>();
  if (kind > static_cast<std::uint8_t>(CompressorKind::Quantization)) {
    throw ParameterError("CompressedMessage: unknown kind byte " + std::to_string(kind));
  }
  m.kind = static_cast<CompressorKind>(kind);
  m.d = r.get<std::uint32_t>();
  auto check_index = [&m](std::uint32_t i) {
    if (i >= m.d) {
      throw ParameterError("CompressedMessage: index out of range");
    }
    return i;
  };
  switch (m.kind) {
  case CompressorKind::Identity:
    m.values.resize(m.d);
    for (auto& v : m.values) {
      v = r.get<double>();
    }
    break;
  case CompressorKind::RandomK: {
    m.rng_seed = r.get<std::uint64_t>();
    m.rng_stream = r.get<std::uint64_t>();
    m.rng_counter = r.get<std::uint64_t>();
    const auto k = r.get<std::uint32_t>();
    if (k > m.d) {
      throw ParameterError("CompressedMessage: k exceeds d");
    }
    m.values.resize(k);
    for (auto& v : m.values) {
      v = r.get<double>();
    }
    break;
  }
  case CompressorKind::TopK: {
    const auto k = r.get<std::uint32_t>();
    if (k > m.d) {
      throw ParameterError("CompressedMessage: k exceeds d");
    }
    for (std::uint32_t j = 0; j < k; ++j) {
      m.indices.push_back(check_index(r.get<std::uint32_t>()));
      m.values.push_back(r.get<double>());
    }
    break;
  }
  case CompressorKind::Sign:
    m.scale = r.get<double>();
    m.sign_bits.resize((m.d + 7) / 8);
    for (auto& b : m.sign_bits) {
      b = r.get<std::uint8_t>();
    }
    break;
  case CompressorKind::Quantization: {
    m.scale = r.get<double>();
    m.s = r.get<std::uint32_t>();
    const auto nnz = r.get<std::uint32_t>();
    if (nnz > m.d) {
      throw ParameterError("CompressedMessage: more levels than coordinates");
    }
    for (std::uint32_t j = 0; j < nnz; ++j) {
      m.indices.push_back(check_index(r.get<std::uint32_t>()));
      m.levels.push_back(r.get<std::int32_t>());
    }
    break;
  }
  }
  if (!r.done()) {
    throw ParameterError("CompressedMessage: trailing bytes");
  }
  return m;
}

VectorSampler isotropic_gaussian_sampler() {
  return [](SeededRng& rng, std::span<double> out) { fill_gaussian(rng, 1.0, out); };
}

FactorEstimate compression_factor_estimate(const CompressorSpec& spec, const VectorSampler& sampler,
                                           std::size_t trials, std::uint64_t seed, Exec exec) {
  spec.validate();
  if (trials < 1) {
    throw ParameterError("compression_factor_estimate: trials must be positive");
  }
  // NaN marks a skipped (zero) sample.
  const auto ratios = map_indices<double>(trials, exec, [&](std::size_t t) {
    SeededRng sample_rng = SeededRng::for_stream(seed, Purpose::Sampler, 0, t);
    SeededRng comp_rng = SeededRng::for_stream(seed, Purpose::CompressorShared, 0, t);
    ParamVector x(spec.d);
    sampler(sample_rng, x.span());
    const double nx = norm_sq(x);
    if (nx == 0.0) {
      return std::nan("");
    }
    const ParamVector c = apply_compressor(spec, x, comp_rng);
    return norm_sq(x - c) / nx;
  });

  FactorEstimate est;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double r : ratios) {
    if (std::isnan(r)) {
      ++est.skipped;
      continue;
    }
    ++est.used;
    sum += r;
    sum_sq += r * r;
  }
  if (est.used == 0) {
    throw ParameterError("compression_factor_estimate: sampler produced only zero vectors");
  }
  const double n = static_cast<double>(est.used);
  est.ratio = sum / n;
  if (est.used > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.ratio * est.ratio) / (n - 1.0));
    est.std_error = std::sqrt(var / n);
  }
  return est;
}

} // namespace csgd
