#include <cmath>

#include <gtest/gtest.h>

#include "csgd/errors.hpp"
#include "csgd/optimizer.hpp"

using namespace csgd;

namespace {

HyperParams fixed_hp(std::size_t d, double eta, double r) {
  HyperParams hp;
  hp.d = d;
  hp.eps = 0.1;
  hp.L = 1.0;
  hp.rho = 1.0;
  hp.eta = eta;
  hp.r = r;
  hp.I = 1e9;
  hp.R = 1e9;
  hp.T = 0;
  return hp;
}

SingleOracle zero_gradient_oracle(std::size_t d) {
  return SingleOracle(StochasticOracle(Objective::quadratic(DenseMatrix(d)), NoiseKind::AdditiveGaussian, 0.0));
}

// Smallest seed whose shared compressor stream at iteration t makes RandomK(d, 1) keep `index`.
std::uint64_t seed_selecting(std::size_t d, std::uint32_t index, std::uint64_t t) {
  for (std::uint64_t seed = 1;; ++seed) {
    SeededRng rng = SeededRng::for_stream(seed, Purpose::CompressorShared, 0, t);
    if (random_k_indices(d, 1, rng).front() == index) {
      return seed;
    }
  }
}

} // namespace

TEST(Step, IdentityKeepsErrorZeroAndMatchesPerturbedSgd) {
  const std::size_t d = 4;
  const SingleOracle oracle(StochasticOracle(Objective::double_well(d), NoiseKind::AdditiveGaussian, 0.3));
  const HyperParams hp = fixed_hp(d, 0.05, 0.2);
  OptimizerState state = OptimizerState::start(ParamVector{0.1, -0.2, 0.3, 0.0});
  ParamVector x = state.x;
  StepOptions opt;
  opt.seed = 5;
  for (std::uint64_t t = 0; t < 50; ++t) {
    ParamVector g(d), xi(d);
    oracle.gradient(x, opt.seed, t, g);
    artificial_noise(opt.seed, t, hp, xi);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] -= hp.eta * (g[i] + xi[i]);
    }
    step(state, oracle, CompressorSpec::identity(d), hp, opt);
    ASSERT_EQ(state.e, ParamVector(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
      ASSERT_NEAR(state.x[i], x[i], 1e-14);
    }
    EXPECT_EQ(corrected_iterate(state, hp), state.x);
  }
}

TEST(Step, DeterministicQuadraticIsGradientDescent) {
  const DenseMatrix H = Objective::quadratic_spectrum(std::vector<double>{-0.5, 1.0, 2.0}, 4).matrix();
  const SingleOracle oracle(StochasticOracle(Objective::quadratic(H), NoiseKind::AdditiveGaussian, 0.0));
  const HyperParams hp = fixed_hp(3, 0.1, 0.0);
  OptimizerState state = OptimizerState::start(ParamVector{1.0, 2.0, -1.0});
  ParamVector x = state.x;
  for (int t = 0; t < 100; ++t) {
    const ParamVector hx = H.apply(x);
    for (std::size_t i = 0; i < 3; ++i) {
      x[i] -= hp.eta * hx[i];
    }
    step(state, oracle, CompressorSpec::identity(3), hp);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(state.x[i], x[i], 1e-12 * (1.0 + std::abs(x[i])));
  }
}

TEST(Step, RandomKSingleCoordinateExample) {
  const HyperParams hp = fixed_hp(2, 0.1, 0.0);
  OptimizerState state = OptimizerState::start(ParamVector(2, 0.0));
  state.e = ParamVector{2.0, 4.0};
  StepOptions opt;
  opt.seed = seed_selecting(2, 1, 0);
  const StepDetail detail = step(state, zero_gradient_oracle(2), CompressorSpec::random_k(2, 1), hp, opt);
  EXPECT_EQ(detail.compressed, (ParamVector{0.0, 4.0}));
  EXPECT_EQ(state.e, (ParamVector{2.0, 0.0}));
  EXPECT_EQ(state.x, (ParamVector{0.0, -0.4}));
  EXPECT_EQ(detail.cost_bits, 64u);
}

TEST(Step, ReflectionFlipsNoiseAlongDirection) {
  HyperParams hp = fixed_hp(3, 0.1, 1.0);
  ParamVector xi(3), flipped;
  artificial_noise(7, 2, hp, xi);
  flipped = xi;
  const ParamVector v{0.0, 1.0, 0.0};
  reflect_along(v, flipped);
  EXPECT_EQ(flipped[0], xi[0]);
  EXPECT_EQ(flipped[1], -xi[1]);
  EXPECT_EQ(flipped[2], xi[2]);
  reflect_along(v, flipped);
  EXPECT_EQ(flipped, xi);
}

TEST(Reset, FlagOffNeverResets) {
  HyperParams hp = fixed_hp(2, 0.1, 0.0);
  hp.I = 1.0;
  hp.R = 1e-3;
  OptimizerState state = OptimizerState::start(ParamVector(2, 0.0));
  state.t = 100;
  state.e = ParamVector{5.0, 5.0};
  EXPECT_FALSE(maybe_reset(state, hp, false));
  EXPECT_EQ(state.e, (ParamVector{5.0, 5.0}));
}

TEST(Reset, FiresOnElapsedTime) {
  HyperParams hp = fixed_hp(2, 0.1, 0.0);
  hp.I = 10.0;
  OptimizerState state = OptimizerState::start(ParamVector{1.0, 1.0});
  state.t = 11;
  state.e = ParamVector{3.0, -2.0};
  ASSERT_TRUE(maybe_reset(state, hp, true));
  EXPECT_EQ(state.e, ParamVector(2, 0.0));
  EXPECT_DOUBLE_EQ(state.x[0], 1.0 - 0.1 * 3.0);
  EXPECT_DOUBLE_EQ(state.x[1], 1.0 + 0.1 * 2.0);
  EXPECT_EQ(state.t_prime, 11u);
  EXPECT_EQ(state.anchor, state.x);
}

TEST(Reset, ExactBudgetDoesNotFire) {
  HyperParams hp = fixed_hp(2, 0.1, 0.0);
  hp.I = 10.0;
  OptimizerState state = OptimizerState::start(ParamVector{1.0, 1.0});
  state.t = 10;
  EXPECT_FALSE(maybe_reset(state, hp, true));
}

TEST(Reset, FiresOnDistance) {
  HyperParams hp = fixed_hp(2, 0.1, 0.0);
  hp.I = 1000.0;
  hp.R = 0.5;
  OptimizerState state = OptimizerState::start(ParamVector(2, 0.0));
  state.t = 3;
  state.x = ParamVector{0.5 * 1.01, 0.0};
  EXPECT_FALSE(reset_due(3, 0, state.anchor, ParamVector{0.5 * 0.99, 0.0}, hp));
  EXPECT_TRUE(maybe_reset(state, hp, true));
}

TEST(Reset, DriftOnQuadraticTriggersDistanceBranch) {
  const SingleOracle oracle(StochasticOracle(
      Objective::quadratic(DenseMatrix::diagonal(std::vector<double>{-1.0, 1.0})), NoiseKind::AdditiveGaussian, 0.0));
  HyperParams hp = fixed_hp(2, 0.2, 0.0);
  hp.I = 1000.0;
  hp.R = 0.5;
  RunOptions opt;
  opt.reset_error = true;
  opt.iterations = 50;
  const RunTrace trace = run(oracle, CompressorSpec::top_k(2, 1), hp, ParamVector{0.1, 0.1}, opt);
  ASSERT_FALSE(trace.aborted) << trace.abort_reason;
  ASSERT_GT(trace.resets, 0u);
  EXPECT_GT(trace.checkpoints.size(), 1u);
}

TEST(Run, ZeroIterationsKeepsInitialRecord) {
  const SingleOracle oracle(StochasticOracle(Objective::double_well(3), NoiseKind::AdditiveGaussian, 1.0));
  const HyperParams hp = fixed_hp(3, 0.1, 1.0);
  const RunTrace trace = run(oracle, CompressorSpec::random_k(3, 1), hp, ParamVector(3, 0.5));
  ASSERT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.records[0].t, 0u);
  EXPECT_EQ(trace.iterations, 0u);
  EXPECT_EQ(trace.total_bits, 0u);
  EXPECT_EQ(trace.x_final, ParamVector(3, 0.5));
}

TEST(Run, PsdQuadraticDecreasesMonotonically) {
  const Objective obj = Objective::quadratic_spectrum(std::vector<double>{0.5, 1.0, 2.0}, 2);
  const SingleOracle oracle(StochasticOracle(obj, NoiseKind::AdditiveGaussian, 0.0));
  const ParamVector x0{1.0, 1.0, 1.0};
  PlannerInput in;
  in.eps = 0.1;
  in.L = 2.0;
  in.rho = 1.0;
  in.ell_tilde = 2.0;
  in.compressor = CompressorSpec::identity(3);
  in.f_max = obj.value(x0);
  in.constants.c_r = 0.0;
  const HyperParams hp = plan(in);
  ASSERT_EQ(hp.r, 0.0);
  const RunTrace trace = run(oracle, in.compressor, hp, x0);
  ASSERT_FALSE(trace.aborted);
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    ASSERT_LE(trace.records[i].f, trace.records[i - 1].f) << "t=" << trace.records[i].t;
  }
  EXPECT_LE(norm(obj.gradient(trace.x_final)), hp.eps);
}

TEST(Run, StrideKeepsEndpointsAndResets) {
  const SingleOracle oracle(StochasticOracle(Objective::double_well(3), NoiseKind::AdditiveGaussian, 0.1));
  HyperParams hp = fixed_hp(3, 0.05, 0.1);
  hp.I = 7.0;
  RunOptions opt;
  opt.iterations = 100;
  opt.record_stride = 10;
  opt.reset_error = true;
  const RunTrace trace = run(oracle, CompressorSpec::top_k(3, 1), hp, ParamVector(3, 0.0), opt);
  ASSERT_FALSE(trace.aborted);
  EXPECT_EQ(trace.records.front().t, 0u);
  EXPECT_EQ(trace.records.back().t, 100u);
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    ASSERT_LT(trace.records[i - 1].t, trace.records[i].t);
    const auto& r = trace.records[i];
    EXPECT_TRUE(r.t % 10 == 0 || r.reset || r.t == 100);
  }
  EXPECT_EQ(trace.resets, 12u); // t = 8, 16, ..., 96
}

TEST(Run, DivergenceAbortsWithReason) {
  const SingleOracle oracle(StochasticOracle(
      Objective::quadratic(DenseMatrix::diagonal(std::vector<double>{2.0, 2.0})), NoiseKind::AdditiveGaussian, 0.0));
  RunOptions opt;
  opt.iterations = 10000;
  const RunTrace trace = run(oracle, CompressorSpec::identity(2), fixed_hp(2, 10.0, 0.0), ParamVector{1.0, 1.0}, opt);
  EXPECT_TRUE(trace.aborted);
  EXPECT_NE(trace.abort_reason.find("non-finite"), std::string::npos);
  EXPECT_TRUE(trace.records.back().f < std::numeric_limits<double>::infinity());
}

TEST(Run, LeavingDomainAborts) {
  const SingleOracle oracle(
      StochasticOracle(Objective::double_well(2).with_box(1.0), NoiseKind::AdditiveGaussian, 0.0));
  RunOptions opt;
  opt.iterations = 100;
  const RunTrace trace = run(oracle, CompressorSpec::identity(2), fixed_hp(2, 5.0, 0.0), ParamVector{0.9, 0.0}, opt);
  EXPECT_TRUE(trace.aborted);
  EXPECT_NE(trace.abort_reason.find("domain"), std::string::npos);
  EXPECT_THROW(run(oracle, CompressorSpec::identity(2), fixed_hp(2, 0.1, 0.0), ParamVector{2.0, 0.0}),
               DomainError);
}

TEST(Run, SameSeedSameTrace) {
  const SingleOracle oracle(StochasticOracle(Objective::double_well(5), NoiseKind::AdditiveGaussian, 0.2));
  const HyperParams hp = fixed_hp(5, 0.05, 0.3);
  RunOptions opt;
  opt.iterations = 200;
  opt.seed = 9;
  const RunTrace a = run(oracle, CompressorSpec::random_k(5, 2), hp, ParamVector(5, 0.0), opt);
  const RunTrace b = run(oracle, CompressorSpec::random_k(5, 2), hp, ParamVector(5, 0.0), opt);
  EXPECT_EQ(a.x_final, b.x_final);
  opt.seed = 10;
  const RunTrace c = run(oracle, CompressorSpec::random_k(5, 2), hp, ParamVector(5, 0.0), opt);
  EXPECT_NE(a.x_final, c.x_final);
}
