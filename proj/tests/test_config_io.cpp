#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "csgd/config.hpp"
#include "csgd/errors.hpp"
#include "csgd/io.hpp"

using namespace csgd;

namespace {

int error_line(const std::string& yaml) {
  try {
    (void)parse_config(yaml);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

} // namespace

TEST(Config, ShippedConfigsParseAndPlan) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(CSGD_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") {
      continue;
    }
    ++n;
    SCOPED_TRACE(entry.path().string());
    const RunConfig cfg = load_config(entry.path().string());
    const csgd::Setup setup = make_setup(cfg, cfg.execution.seed);
    EXPECT_EQ(setup.x0.dim(), cfg.objective.dim);
    EXPECT_EQ(setup.workers.size(), cfg.cluster.workers);
    EXPECT_GT(setup.hp.eta, 0.0);
    EXPECT_TRUE(setup.objective.in_domain(setup.x0.span()));
  }
  EXPECT_GE(n, 5u);
}

TEST(Config, DefaultsAndValues) {
  const RunConfig cfg = parse_config(R"(
objective:
  kind: quadratic
  dim: 3
  spectrum: [-0.5, 1, 2]
  rotation_seed: 4
oracle:
  noise: coordinate_sampling
compressor:
  kind: top_k
  k: 2
planner:
  eps: 0.2
  rho: 1
  constants:
    c_I: 3
    T: 100
execution:
  reset_error: true
)");
  EXPECT_EQ(cfg.objective.kind, ObjectiveKind::Quadratic);
  EXPECT_EQ(cfg.objective.spectrum, (std::vector<double>{-0.5, 1, 2}));
  EXPECT_EQ(cfg.oracle.noise, NoiseKind::CoordinateSampling);
  EXPECT_EQ(cfg.compressor.k, 2u);
  EXPECT_EQ(cfg.planner.eps, 0.2);
  EXPECT_EQ(cfg.planner.constants.c_I, 3.0);
  EXPECT_EQ(cfg.planner.constants.T, 100u);
  EXPECT_TRUE(cfg.execution.reset_error);
  EXPECT_EQ(cfg.execution.seed, 1u);
  EXPECT_EQ(cfg.output_dir, "out");
  const csgd::Setup s = make_setup(cfg, 1);
  EXPECT_EQ(s.hp.T, 100u);
  EXPECT_EQ(s.hp.alpha, 3.0);
}

TEST(Config, BalancedRandomKSize) {
  const RunConfig cfg = load_config(std::string(CSGD_CONFIG_DIR) + "/plan_balanced.yaml");
  EXPECT_FALSE(cfg.compressor.k.has_value());
  EXPECT_EQ(make_setup(cfg, 1).compressor.k, 4u);
}

TEST(Config, WorkerTiltsHaveZeroMean) {
  const RunConfig cfg = load_config(std::string(CSGD_CONFIG_DIR) + "/distributed.yaml");
  const csgd::Setup s = make_setup(cfg, 1);
  ASSERT_EQ(s.workers.size(), 4u);
  for (std::size_t j = 0; j < cfg.objective.dim; ++j) {
    double sum = 0.0;
    for (const auto& w : s.workers) {
      sum += w.objective().tilt()[j];
    }
    EXPECT_NEAR(sum, 0.0, 1e-15);
  }
  EXPECT_NE(s.workers[0].objective().tilt(), s.workers[1].objective().tilt());
}

TEST(Config, UnknownKeyReportsLine) {
  EXPECT_EQ(error_line("objective:\n  kind: double_well\n  dim: 3\n  dimm: 4\n"), 4);
  EXPECT_EQ(error_line("objective:\n  kind: double_well\n  dim: 3\nplaner:\n  eps: 0.1\n"), 4);
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_EQ(error_line("objective:\n  kind: double_well\n  dim: three\n"), 3);
  EXPECT_EQ(error_line("objective:\n  kind: double_well\n  dim: 0\n"), 3);
  EXPECT_EQ(error_line("objective:\n  kind: double_well\n  dim: 3\nplanner:\n  eps: -1\n"), 5);
  EXPECT_EQ(error_line("objective:\n  kind: saddle\n  dim: 3\n"), 2);
  EXPECT_EQ(error_line("objective: [1, 2]\n"), 1);
  EXPECT_EQ(error_line("objective:\n  kind: double_well\n  dim: [3\n"), 4);
  EXPECT_THROW(parse_config("oracle:\n  sigma: 1\n"), ConfigError);
  EXPECT_THROW(parse_config(""), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST(Config, QuadraticNeedsRho) {
  const RunConfig cfg = parse_config("objective:\n  kind: quadratic\n  dim: 2\n  spectrum: [-1, 1]\n");
  EXPECT_THROW(make_setup(cfg, 1), ConfigError);
}

TEST(Io, FormatRealRoundTrips) {
  SeededRng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.below(40)) - 20);
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(3.0), "3");
  EXPECT_EQ(format_real(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_real(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Io, TraceCsvLayout) {
  RunTrace trace;
  IterRecord r;
  r.t = 0;
  r.f = 0.5;
  trace.records.push_back(r);
  r.t = 1;
  r.bits = 64;
  r.reset = true;
  trace.records.push_back(r);
  std::ostringstream out;
  write_trace_csv(out, trace);
  EXPECT_EQ(out.str(), "t,f,grad_norm,err_norm,y_drift,bits,reset\n0,0.5,0,0,0,0,0\n1,0.5,0,0,0,64,1\n");
}

TEST(Io, JsonEchoes) {
  const auto j = to_json(CompressorSpec::top_k(10, 3));
  EXPECT_EQ(j.at("kind"), "top_k");
  EXPECT_EQ(j.at("k"), 3);
  HyperParams hp;
  hp.eta = 0.01;
  hp.T = 5;
  const auto h = to_json(hp);
  EXPECT_EQ(h.at("eta"), 0.01);
  EXPECT_EQ(h.at("T"), 5);
}
