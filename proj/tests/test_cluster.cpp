#include <sstream>

#include <gtest/gtest.h>

#include "csgd/cluster.hpp"
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
  return hp;
}

StochasticOracle noiseless(const Objective& obj) {
  return StochasticOracle(obj, NoiseKind::AdditiveGaussian, 0.0);
}

std::vector<StochasticOracle> tilted_workers(std::size_t w, std::size_t d, double sigma) {
  std::vector<StochasticOracle> out;
  for (std::size_t i = 0; i < w; ++i) {
    ParamVector b(d);
    for (std::size_t j = 0; j < d; ++j) {
      b[j] = 0.05 * (static_cast<double>((i + j) % 3) - 1.0);
    }
    out.emplace_back(Objective::double_well(d).with_box(2.0).with_tilt(b), NoiseKind::AdditiveGaussian,
                     sigma);
  }
  return out;
}

std::uint64_t seed_selecting(std::size_t d, std::uint32_t index, std::uint64_t t) {
  for (std::uint64_t seed = 1;; ++seed) {
    SeededRng rng = SeededRng::for_stream(seed, Purpose::CompressorShared, 0, t);
    if (random_k_indices(d, 1, rng).front() == index) {
      return seed;
    }
  }
}

} // namespace

TEST(Round, TwoWorkersSharedRandomK) {
  const Objective zero = Objective::quadratic(DenseMatrix(2));
  std::vector<WorkerState> workers = {{0, ParamVector{2.0, 0.0}, noiseless(zero)},
                                      {1, ParamVector{0.0, 0.0}, noiseless(zero)}};
  ParamVector x(2, 0.0), coord;
  CommLedger ledger;
  RoundOptions opt;
  opt.seed = seed_selecting(2, 0, 0);
  const RoundResult r =
      cluster_round(workers, x, coord, 0, CompressorSpec::random_k(2, 1), fixed_hp(2, 0.5, 0.0), opt, ledger);
  EXPECT_EQ(r.g, (ParamVector{1.0, 0.0}));
  // Each worker keeps what its own message dropped.
  EXPECT_EQ(workers[0].e, (ParamVector{0.0, 0.0}));
  EXPECT_EQ(workers[1].e, (ParamVector{0.0, 0.0}));
  EXPECT_EQ(x, (ParamVector{-0.5, 0.0}));
}

TEST(Round, IdentityAveragesExactly) {
  const Objective obj = Objective::double_well(3);
  std::vector<WorkerState> workers;
  for (std::size_t i = 0; i < 4; ++i) {
    workers.push_back({i, ParamVector(3), noiseless(obj)});
  }
  ParamVector x{0.3, -0.7, 1.2}, coord;
  const ParamVector grad = obj.gradient(x);
  CommLedger ledger;
  const RoundResult r =
      cluster_round(workers, x, coord, 0, CompressorSpec::identity(3), fixed_hp(3, 0.1, 0.0), {}, ledger);
  EXPECT_EQ(r.g, grad);
  for (const auto& w : workers) {
    EXPECT_EQ(w.e, ParamVector(3, 0.0));
  }
  EXPECT_EQ(ledger.entries().size(), 4u);
}

TEST(Round, RejectsMismatchedDimensions) {
  std::vector<WorkerState> workers = {{0, ParamVector(3), noiseless(Objective::double_well(3))}};
  ParamVector x(3), coord;
  CommLedger ledger;
  EXPECT_THROW(cluster_round(workers, x, coord, 0, CompressorSpec::identity(4), fixed_hp(3, 0.1, 0.0), {}, ledger),
               ParameterError);
  std::vector<WorkerState> none;
  EXPECT_THROW(cluster_round(none, x, coord, 0, CompressorSpec::identity(3), fixed_hp(3, 0.1, 0.0), {}, ledger),
               ParameterError);
}

TEST(Distributed, SingleWorkerMatchesRun) {
  const StochasticOracle oracle(Objective::double_well(6).with_box(2.0), NoiseKind::AdditiveGaussian, 0.2);
  HyperParams hp = fixed_hp(6, 0.05, 0.1);
  hp.I = 13.0;
  hp.R = 0.3;
  for (bool reset : {false, true}) {
    for (const auto& spec : {CompressorSpec::random_k(6, 2), CompressorSpec::top_k(6, 2), CompressorSpec::sign(6)}) {
      DistributedOptions opt;
      opt.run.seed = 4;
      opt.run.iterations = 300;
      opt.run.reset_error = reset;
      const DistributedResult d = distributed_run({oracle}, spec, hp, ParamVector(6, 0.1), opt);
      const RunTrace s = run(SingleOracle(oracle), spec, hp, ParamVector(6, 0.1), opt.run);
      ASSERT_EQ(d.trace.records.size(), s.records.size());
      for (std::size_t i = 0; i < s.records.size(); ++i) {
        ASSERT_EQ(d.trace.records[i].f, s.records[i].f);
        ASSERT_EQ(d.trace.records[i].reset, s.records[i].reset);
      }
      EXPECT_EQ(d.trace.x_final, s.x_final);
      EXPECT_EQ(d.trace.e_final, s.e_final);
      EXPECT_EQ(d.trace.resets, s.resets);
      EXPECT_EQ(d.trace.total_bits, s.total_bits);
    }
  }
}

TEST(Distributed, RandomKUplinkIsWorkersTimesRoundsTimesK) {
  const std::size_t W = 3, d = 10, k = 4;
  const std::uint64_t T = 25;
  DistributedOptions opt;
  opt.run.iterations = T;
  opt.run.value_bits = 32;
  const DistributedResult res =
      distributed_run(tilted_workers(W, d, 0.1), CompressorSpec::random_k(d, k), fixed_hp(d, 0.05, 0.1),
                      ParamVector(d, 0.0), opt);
  ASSERT_FALSE(res.trace.aborted);
  EXPECT_EQ(res.ledger.total_uplink(), W * T * k * 32);
  EXPECT_EQ(res.trace.total_bits, res.ledger.total_uplink());
  std::uint64_t up = 0, down = 0;
  for (const auto& e : res.ledger.entries()) {
    up += e.uplink_bits;
    down += e.downlink_bits;
  }
  EXPECT_EQ(up, res.ledger.total_uplink());
  EXPECT_EQ(down, res.ledger.total_downlink());
}

TEST(Distributed, RandomKTenthOfIdentityBits) {
  const std::size_t d = 100;
  DistributedOptions opt;
  opt.run.iterations = 20;
  const auto workers = tilted_workers(2, d, 0.1);
  const HyperParams hp = fixed_hp(d, 0.01, 0.1);
  const auto a = distributed_run(workers, CompressorSpec::identity(d), hp, ParamVector(d, 0.0), opt);
  const auto b = distributed_run(workers, CompressorSpec::random_k(d, d / 10), hp, ParamVector(d, 0.0), opt);
  EXPECT_EQ(b.ledger.total_uplink() * 10, a.ledger.total_uplink());
}

TEST(Distributed, MeanWorkerErrorMatchesSingleProcessForLinearCompressor) {
  const std::size_t d = 8;
  const auto workers = tilted_workers(4, d, 0.0);
  const AveragedOracle averaged(workers);
  HyperParams hp = fixed_hp(d, 0.05, 0.2);
  DistributedOptions opt;
  opt.run.iterations = 200;
  opt.run.seed = 2;
  const auto spec = CompressorSpec::random_k(d, 3);
  const DistributedResult dres = distributed_run(workers, spec, hp, ParamVector(d, 0.2), opt);
  const RunTrace single = run(averaged, spec, hp, ParamVector(d, 0.2), opt.run);
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_NEAR(dres.trace.e_final[i], single.e_final[i], 1e-12);
    EXPECT_NEAR(dres.trace.x_final[i], single.x_final[i], 1e-12);
  }
}

TEST(Distributed, SchedulingDoesNotChangeResults) {
  const std::size_t d = 12;
  const auto workers = tilted_workers(5, d, 0.2);
  HyperParams hp = fixed_hp(d, 0.05, 0.1);
  hp.I = 17.0;
  for (bool downlink : {false, true}) {
    DistributedOptions opt;
    opt.run.iterations = 150;
    opt.run.reset_error = true;
    opt.compress_downlink = downlink;
    opt.exec = Exec::Serial;
    const auto a = distributed_run(workers, CompressorSpec::top_k(d, 3), hp, ParamVector(d, 0.0), opt);
    opt.exec = Exec::Parallel;
    const auto b = distributed_run(workers, CompressorSpec::top_k(d, 3), hp, ParamVector(d, 0.0), opt);
    EXPECT_EQ(a.trace.x_final, b.trace.x_final);
    EXPECT_EQ(a.worker_errors, b.worker_errors);
    EXPECT_EQ(a.ledger.total_downlink(), b.ledger.total_downlink());
  }
}

TEST(Distributed, ResetZeroesEveryWorkerError) {
  const std::size_t d = 6;
  HyperParams hp = fixed_hp(d, 0.05, 0.1);
  hp.I = 10.0;
  DistributedOptions opt;
  opt.run.iterations = 11; // the reset fires at the top of t = 11, after the last round
  opt.run.reset_error = true;
  auto res = distributed_run(tilted_workers(3, d, 0.1), CompressorSpec::top_k(d, 1), hp, ParamVector(d, 0.0), opt);
  EXPECT_EQ(res.trace.resets, 0u);
  opt.run.iterations = 12;
  res = distributed_run(tilted_workers(3, d, 0.1), CompressorSpec::top_k(d, 1), hp, ParamVector(d, 0.0), opt);
  ASSERT_EQ(res.trace.resets, 1u);
  EXPECT_GT(norm(res.worker_errors[0]), 0.0); // one round after the reset
}

TEST(Ledger, CsvHasHeaderAndRows) {
  CommLedger ledger;
  ledger.add({0, 0, 64, 640});
  ledger.add({0, 1, 32, 640});
  std::ostringstream out;
  ledger.write_csv(out);
  EXPECT_EQ(out.str(), "round,worker,uplink_bits,downlink_bits\n0,0,64,640\n0,1,32,640\n");
  EXPECT_EQ(ledger.total_uplink(), 96u);
  EXPECT_EQ(ledger.total_downlink(), 1280u);
}
