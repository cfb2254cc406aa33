#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "csgd/analysis.hpp"
#include "csgd/errors.hpp"

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
  hp.mu = 1.0;
  return hp;
}

Objective saddle_quadratic(std::size_t d, double gamma) {
  std::vector<double> diag(d, 1.0);
  diag[0] = -gamma;
  return Objective::quadratic(DenseMatrix::diagonal(diag));
}

} // namespace

TEST(Certify, DoubleWellOriginCurvatureThreshold) {
  const Objective obj = Objective::double_well(4);
  // -1 lies above -sqrt(12 * 0.1) = -1.095, so the origin passes the second-order test there.
  const StationarityReport loose = certify(obj, ParamVector(4, 0.0), 0.1, 12.0, 11.0);
  EXPECT_TRUE(loose.is_fosp);
  EXPECT_NEAR(loose.lambda_min, -1.0, 1e-7);
  EXPECT_TRUE(loose.is_sosp);
  // -1 < -sqrt(0.5 * 0.1) = -0.224: a strict saddle.
  const StationarityReport tight = certify(obj, ParamVector(4, 0.0), 0.1, 0.5, 11.0);
  EXPECT_TRUE(tight.is_fosp);
  EXPECT_NEAR(tight.lambda_min, -1.0, 1e-7);
  EXPECT_FALSE(tight.is_sosp);
}

TEST(Certify, DoubleWellMinimum) {
  const Objective obj = Objective::double_well(4);
  for (double eps : {0.0, 0.01, 1.0}) {
    const StationarityReport rep = certify(obj, ParamVector(4, 1.0), eps, 12.0, 11.0);
    EXPECT_EQ(rep.grad_norm, 0.0);
    EXPECT_NEAR(rep.lambda_min, 2.0, 1e-7);
    EXPECT_TRUE(rep.is_sosp);
  }
}

TEST(Certify, FirstOrderThreshold) {
  const Objective obj = Objective::quadratic(DenseMatrix::diagonal(std::vector<double>{1.0, 2.0}));
  const double eps = 0.1;
  const ParamVector x{0.0, eps / 4.0}; // ||H x|| = eps / 2
  const StationarityReport rep = certify(obj, x, eps, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(rep.grad_norm, eps / 2.0);
  EXPECT_TRUE(rep.is_fosp);
  EXPECT_TRUE(rep.is_sosp);
}

TEST(SospFraction, TrivialCases) {
  const Objective obj = Objective::double_well(3);
  const std::vector<Checkpoint> minima(5, Checkpoint{0, ParamVector(3, 1.0)});
  const std::vector<Checkpoint> saddles(5, Checkpoint{0, ParamVector(3, 0.0)});
  EXPECT_EQ(sosp_fraction(minima, obj, 0.01, 12.0, 11.0), 1.0);
  EXPECT_EQ(sosp_fraction(saddles, obj, 0.01, 12.0, 11.0), 0.0);
  EXPECT_EQ(fosp_fraction(saddles, obj, 0.01), 1.0);
  EXPECT_EQ(sosp_fraction(minima, obj, 0.01, 12.0, 11.0, Exec::Parallel), 1.0);
  EXPECT_THROW(sosp_fraction({}, obj, 0.01, 12.0, 11.0), ParameterError);
}

TEST(Beta, MatchesDirectSum) {
  for (double eg : {0.01, 0.3, 1.0}) {
    double s = 0.0;
    for (std::uint64_t t = 0; t <= 60; ++t) {
      EXPECT_NEAR(beta(eg, t), std::sqrt(s), 1e-12 * (1.0 + std::sqrt(s)));
      s += std::pow(1.0 + eg, 2.0 * static_cast<double>(t));
    }
  }
}

TEST(Beta, BoundsHold) {
  for (double eg : {0.01, 0.1, 0.5, 1.0}) {
    const BetaBoundsReport rep = check_beta_bounds(eg, 10000);
    EXPECT_TRUE(rep.passed()) << eg;
    EXPECT_LE(rep.max_recurrence_error, 1e-12);
  }
  EXPECT_THROW(check_beta_bounds(0.0, 10), ParameterError);
}

TEST(Coupling, NoNoiseMeansIdenticalSequences) {
  const Objective obj = saddle_quadratic(4, 0.5);
  const SingleOracle oracle(StochasticOracle(obj, NoiseKind::AdditiveGaussian, 0.0));
  CouplingOptions opt;
  opt.seeds = 5;
  opt.horizon = 100;
  const CouplingResult res =
      coupling_experiment(oracle, CompressorSpec::random_k(4, 2), fixed_hp(4, 0.05, 0.0), ParamVector{0.0, 0.1, 0.2, 0.3}, opt);
  for (double v : res.mean_xhat_norm) {
    ASSERT_EQ(v, 0.0);
  }
}

TEST(Coupling, RequiresStrictSaddle) {
  const SingleOracle oracle(StochasticOracle(Objective::double_well(3), NoiseKind::AdditiveGaussian, 0.0));
  CouplingOptions opt;
  opt.seeds = 2;
  opt.horizon = 10;
  EXPECT_THROW(coupling_experiment(oracle, CompressorSpec::identity(3), fixed_hp(3, 0.05, 0.1),
                                   ParamVector(3, 1.0), opt),
               ParameterError);
}

TEST(Coupling, ProjectionFollowsLinearRecurrence) {
  const std::size_t d = 4;
  const double gamma = 0.5;
  const HyperParams hp = fixed_hp(d, 0.05, 0.01);
  const SingleOracle oracle(StochasticOracle(saddle_quadratic(d, gamma), NoiseKind::AdditiveGaussian, 0.0));
  CouplingOptions opt;
  opt.seeds = 40;
  opt.base_seed = 3;
  opt.horizon = 300;
  const CouplingResult res =
      coupling_experiment(oracle, CompressorSpec::identity(d), hp, ParamVector(d, 0.0), opt);
  EXPECT_NEAR(res.gamma, gamma, 1e-9);
  EXPECT_NEAR(std::abs(res.v1[0]), 1.0, 1e-9);

  // Along e_1 the difference of the two runs obeys p' = (1 + eta gamma) p + 2 eta xi_1.
  std::vector<double> mean_abs(opt.horizon + 1, 0.0);
  ParamVector xi(d);
  for (std::size_t s = 0; s < opt.seeds; ++s) {
    double p = 0.0;
    for (std::uint64_t t = 0; t <= opt.horizon; ++t) {
      mean_abs[t] += std::abs(p) / static_cast<double>(opt.seeds);
      artificial_noise(opt.base_seed + s, t, hp, xi);
      p = (1.0 + hp.eta * gamma) * p + 2.0 * hp.eta * xi[0];
    }
  }
  ASSERT_EQ(res.mean_abs_proj.size(), mean_abs.size());
  for (std::size_t t = 0; t < mean_abs.size(); ++t) {
    ASSERT_NEAR(res.mean_abs_proj[t], mean_abs[t], 1e-9 * (1e-12 + mean_abs[t])) << "t=" << t;
  }
  EXPECT_LE(res.max_bookkeeping_error, 1e-12);
}

TEST(Coupling, GrowthRateMatchesLeadingEigenvalue) {
  const std::size_t d = 4;
  const double gamma = 0.5;
  HyperParams hp = fixed_hp(d, 0.05, 0.01);
  hp.R = 1.0;
  const SingleOracle oracle(StochasticOracle(saddle_quadratic(d, gamma), NoiseKind::AdditiveGaussian, 0.0));
  CouplingOptions opt;
  opt.seeds = 100;
  opt.horizon = 800;
  const CouplingResult res =
      coupling_experiment(oracle, CompressorSpec::identity(d), hp, ParamVector(d, 0.0), opt);
  const GrowthFit fit = fit_growth(res, hp);
  EXPECT_NEAR(fit.expected, std::log(1.0 + hp.eta * gamma), 1e-15);
  EXPECT_GE(fit.t_begin, 80u); // ceil(2 / (eta gamma)) up to rounding of eta gamma
  EXPECT_LE(fit.t_begin, 81u);
  EXPECT_GT(fit.t_end, fit.t_begin + 10);
  EXPECT_LE(fit.relative_error, 0.1);
}

TEST(ImproveOrLocalize, DeterministicQuadraticDescentHoldsExactly) {
  const std::vector<double> lambda{0.2, 1.0, 3.0};
  const Objective obj = Objective::quadratic(DenseMatrix::diagonal(lambda));
  const SingleOracle oracle(StochasticOracle(obj, NoiseKind::AdditiveGaussian, 0.0));
  HyperParams hp = fixed_hp(3, 0.1, 0.0);
  hp.L = 3.0;
  hp.I = 200.0;
  const ParamVector x0{1.0, -1.0, 0.5};
  RunOptions opt;
  opt.iterations = 200;
  const std::vector<RunTrace> traces(2, run(oracle, CompressorSpec::identity(3), hp, x0, opt));
  const WindowReport rep = improve_or_localize_check(traces, hp, 0.0);
  EXPECT_TRUE(rep.passed);

  // Closed-form iterates x_t = (1 - eta lambda)^t x_0.
  double worst = std::numeric_limits<double>::infinity();
  const double f0 = obj.value(x0);
  for (int t = 1; t <= 200; ++t) {
    double ft = 0.0, drift = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double xi = std::pow(1.0 - hp.eta * lambda[i], t) * x0[i];
      ft += 0.5 * lambda[i] * xi * xi;
      drift += (xi - x0[i]) * (xi - x0[i]);
    }
    const double slack = f0 - ft - drift / (8.0 * hp.eta * t);
    ASSERT_GE(slack, 0.0);
    worst = std::min(worst, slack);
  }
  EXPECT_NEAR(rep.worst_slack, worst, 1e-12);
}

TEST(ImproveOrLocalize, EmptyWindowIsZero) {
  const SingleOracle oracle(StochasticOracle(Objective::double_well(2), NoiseKind::AdditiveGaussian, 0.0));
  const HyperParams hp = fixed_hp(2, 0.1, 0.0);
  const std::vector<RunTrace> traces(3, run(oracle, CompressorSpec::identity(2), hp, ParamVector(2, 0.5)));
  const WindowReport rep = improve_or_localize_check(traces, hp, 0.0);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.worst_slack, 0.0);
  EXPECT_THROW(improve_or_localize_check({}, hp, 0.0), ParameterError);
}

TEST(ErrorBound, IdentityHasNoError) {
  const SingleOracle oracle(StochasticOracle(Objective::double_well(3), NoiseKind::AdditiveGaussian, 0.1));
  const HyperParams hp = fixed_hp(3, 0.05, 0.1);
  RunOptions opt;
  opt.iterations = 50;
  const std::vector<RunTrace> traces(1, run(oracle, CompressorSpec::identity(3), hp, ParamVector(3, 0.2), opt));
  EXPECT_EQ(error_bound_worst_ratio(traces, hp, 0.02), 0.0);
}

TEST(DescentLemma, SlackNonNegativeForGradientDescent) {
  const Objective obj = Objective::quadratic(DenseMatrix::diagonal(std::vector<double>{0.5, 2.0}));
  const SingleOracle oracle(StochasticOracle(obj, NoiseKind::AdditiveGaussian, 0.0));
  HyperParams hp = fixed_hp(2, 0.1, 0.0);
  hp.L = 2.0;
  RunOptions opt;
  opt.iterations = 100;
  const RunTrace trace = run(oracle, CompressorSpec::identity(2), hp, ParamVector{1.0, 1.0}, opt);
  const DescentCheck c = descent_lemma_check(trace, hp, 0.0);
  EXPECT_GE(c.slack(), 0.0);
  EXPECT_NEAR(c.lhs, trace.grad_sq_sum, 1e-12 * c.lhs);
}

TEST(Statistics, KolmogorovSmirnov) {
  std::vector<double> a, b;
  for (int i = 0; i < 200; ++i) {
    a.push_back(i);
    b.push_back(i + 1000);
  }
  const KsResult same = ks_two_sample(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_TRUE(same.passed);
  const KsResult apart = ks_two_sample(a, b);
  EXPECT_EQ(apart.statistic, 1.0);
  EXPECT_FALSE(apart.passed);
  EXPECT_NEAR(apart.critical, 1.628 * std::sqrt(400.0 / 40000.0), 1e-15);
}

TEST(Statistics, MomentsAndStats) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const SampleStats s = sample_stats(a);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.std_error, std::sqrt(2.5 / 5.0), 1e-15);
  EXPECT_TRUE(compare_moments(a, a).passed);
  const std::vector<double> b{101, 102, 103, 104, 105};
  EXPECT_FALSE(compare_moments(a, b).passed);
}

TEST(CompressorBias, QuantizationUnbiasedRandomKNot) {
  const ParamVector x{0.5, -1.0, 2.0, 0.0, 0.25};
  const BiasReport q = compressor_bias(CompressorSpec::quantization(5, 1), x, 20000, 1);
  EXPECT_TRUE(q.passed());
  const BiasReport r = compressor_bias(CompressorSpec::random_k(5, 2), x, 20000, 1);
  EXPECT_FALSE(r.passed());
  const BiasReport p = compressor_bias(CompressorSpec::quantization(5, 1), x, 20000, 1, Exec::Parallel);
  EXPECT_EQ(p.z, q.z);
}
