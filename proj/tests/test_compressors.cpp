#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "csgd/compressors.hpp"
#include "csgd/errors.hpp"

using namespace csgd;

namespace {

std::vector<CompressorSpec> zoo(std::size_t d) {
  return {CompressorSpec::identity(d), CompressorSpec::random_k(d, 2), CompressorSpec::top_k(d, 2),
          CompressorSpec::sign(d), CompressorSpec::quantization(d, 1),
          CompressorSpec::quantization(d, 4)};
}

ParamVector sample(std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed);
  ParamVector x(d);
  for (double& v : x) {
    v = rng.normal();
  }
  return x;
}

} // namespace

TEST(Compress, RandomKWithAllCoordinatesIsIdentity) {
  const ParamVector x = sample(6, 1);
  SeededRng rng(2);
  EXPECT_EQ(compress(CompressorSpec::random_k(6, 6), x, rng).c, x);
}

TEST(Compress, TopKKeepsLargestMagnitudes) {
  SeededRng rng(1);
  const auto out = compress(CompressorSpec::top_k(5, 2), ParamVector{3, -1, 4, 1, 5}, rng);
  EXPECT_EQ(out.c, (ParamVector{0, 0, 4, 0, 5}));
}

TEST(Compress, SignScalesByMeanMagnitude) {
  SeededRng rng(1);
  const auto out = compress(CompressorSpec::sign(3), ParamVector{1, -2, 3}, rng);
  EXPECT_EQ(out.c, (ParamVector{2, -2, 2}));
}

TEST(Compress, QuantizationIsUnbiasedOnExample) {
  const CompressorSpec spec = CompressorSpec::quantization(2, 1);
  const ParamVector x{3, 4};
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    SeededRng rng(9, static_cast<std::uint64_t>(i));
    const double c1 = compress(spec, x, rng).c[0];
    ASSERT_TRUE(c1 == 0.0 || c1 == 5.0) << c1;
    sum += c1;
    sum_sq += c1 * c1;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, 3.0, 3.0 * se);
}

TEST(Compress, ZeroVectorStaysZero) {
  for (const auto& spec : zoo(7)) {
    SeededRng rng(4);
    const auto out = compress(spec, ParamVector(7, 0.0), rng);
    EXPECT_EQ(out.c, ParamVector(7, 0.0)) << to_string(spec.kind);
    EXPECT_EQ(out.msg.decode(), out.c) << to_string(spec.kind);
  }
}

TEST(Compress, DeterministicCompressorsAreIdempotent) {
  const ParamVector x = sample(9, 3);
  for (const auto& spec : {CompressorSpec::identity(9), CompressorSpec::top_k(9, 3),
                           CompressorSpec::sign(9)}) {
    SeededRng a(1), b(1);
    const ParamVector once = apply_compressor(spec, x, a);
    EXPECT_EQ(apply_compressor(spec, once, b), once) << to_string(spec.kind);
  }
}

TEST(Compress, SharedRandomnessReproducesDraw) {
  const ParamVector x = sample(20, 5);
  const auto spec = CompressorSpec::random_k(20, 4);
  SeededRng a(11, 3), b(11, 3);
  EXPECT_EQ(apply_compressor(spec, x, a), apply_compressor(spec, x, b));
}

TEST(Codec, RoundTripIsBitExact) {
  for (std::size_t d : {1u, 8u, 13u}) {
    const ParamVector x = sample(d, 7 + d);
    for (auto spec : zoo(d)) {
      if (spec.k > d) {
        spec.k = d;
      }
      SeededRng rng(21, d);
      const Compressed out = compress(spec, x, rng);
      EXPECT_EQ(out.msg.decode(), out.c) << to_string(spec.kind);
      const auto bytes = out.msg.to_bytes();
      EXPECT_EQ(CompressedMessage::from_bytes(bytes).decode(), out.c) << to_string(spec.kind);
    }
  }
}

TEST(Codec, TruncatedBytesRejected) {
  const ParamVector x = sample(8, 2);
  SeededRng rng(1);
  auto bytes = compress(CompressorSpec::top_k(8, 3), x, rng).msg.to_bytes();
  bytes.pop_back();
  EXPECT_ANY_THROW(CompressedMessage::from_bytes(bytes));
}

TEST(Cost, NominalMessageSizes) {
  EXPECT_EQ(message_cost_bits(CompressorSpec::identity(100), 64), 6400u);
  EXPECT_EQ(message_cost_bits(CompressorSpec::random_k(100, 5), 64), 320u);
  EXPECT_EQ(message_cost_bits(CompressorSpec::top_k(100, 5), 64), 355u);
}

TEST(Cost, MessagesCarryNominalSize) {
  const ParamVector x = sample(100, 1);
  for (const auto& spec : {CompressorSpec::identity(100), CompressorSpec::random_k(100, 5),
                           CompressorSpec::top_k(100, 5), CompressorSpec::sign(100)}) {
    SeededRng rng(1);
    EXPECT_EQ(compress(spec, x, rng, 32).msg.cost_bits, message_cost_bits(spec, 32))
        << to_string(spec.kind);
  }
}

TEST(Cost, CeilLog2) {
  EXPECT_EQ(ceil_log2(1), 0);
  EXPECT_EQ(ceil_log2(2), 1);
  EXPECT_EQ(ceil_log2(100), 7);
  EXPECT_EQ(ceil_log2(128), 7);
  EXPECT_EQ(ceil_log2(129), 8);
}

TEST(Spec, Linearity) {
  EXPECT_TRUE(is_linear(CompressorSpec::identity(4)));
  EXPECT_TRUE(is_linear(CompressorSpec::random_k(4, 2)));
  EXPECT_FALSE(is_linear(CompressorSpec::top_k(4, 2)));
  EXPECT_FALSE(is_linear(CompressorSpec::sign(4)));
}

TEST(Spec, ValidationRejectsBadSizes) {
  EXPECT_THROW(CompressorSpec::random_k(4, 0).validate(), ParameterError);
  EXPECT_THROW(CompressorSpec::top_k(4, 5).validate(), ParameterError);
  EXPECT_THROW(CompressorSpec::identity(0).validate(), ParameterError);
  EXPECT_THROW(CompressorSpec::quantization(4, 0).validate(), ParameterError);
  EXPECT_THROW(compressor_kind_from_string("top-k"), ParameterError);
}

TEST(FactorEstimate, IdentityIsExact) {
  const auto est =
      compression_factor_estimate(CompressorSpec::identity(10), isotropic_gaussian_sampler(), 100, 1);
  EXPECT_EQ(est.ratio, 0.0);
  EXPECT_EQ(est.used, 100u);
}

TEST(FactorEstimate, RandomKMatchesOneMinusKOverD) {
  const auto est = compression_factor_estimate(CompressorSpec::random_k(100, 10),
                                               isotropic_gaussian_sampler(), 100000, 1);
  EXPECT_NEAR(est.ratio, 0.90, 0.01);
}

TEST(FactorEstimate, TopKContractsAtLeastAsMuch) {
  const auto est = compression_factor_estimate(CompressorSpec::top_k(100, 10),
                                               isotropic_gaussian_sampler(), 20000, 1);
  EXPECT_LE(est.ratio, 0.90);
}

TEST(FactorEstimate, ZeroSamplesSkipped) {
  const VectorSampler sometimes_zero = [](SeededRng& rng, std::span<double> out) {
    const double scale = rng.uniform() < 0.5 ? 0.0 : 1.0;
    for (double& v : out) {
      v = scale * rng.normal();
    }
  };
  const auto est = compression_factor_estimate(CompressorSpec::random_k(10, 2), sometimes_zero, 400, 1);
  EXPECT_GT(est.skipped, 100u);
  EXPECT_GT(est.used, 100u);
  EXPECT_EQ(est.used + est.skipped, 400u);
  const VectorSampler zero = [](SeededRng&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  EXPECT_THROW(compression_factor_estimate(CompressorSpec::random_k(10, 2), zero, 50, 1), ParameterError);
}

TEST(FactorEstimate, SerialEqualsParallel) {
  for (const auto& spec : zoo(30)) {
    const auto s = compression_factor_estimate(spec, isotropic_gaussian_sampler(), 2000, 3, Exec::Serial);
    const auto p =
        compression_factor_estimate(spec, isotropic_gaussian_sampler(), 2000, 3, Exec::Parallel);
    EXPECT_EQ(s.ratio, p.ratio) << to_string(spec.kind);
    EXPECT_EQ(s.std_error, p.std_error) << to_string(spec.kind);
  }
}
