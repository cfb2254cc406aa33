#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csgd/cluster.hpp"
#include "csgd/compressors.hpp"
#include "csgd/objectives.hpp"
#include "csgd/planner.hpp"

namespace csgd {

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::DoubleWell;
  std::size_t dim = 0;
  std::optional<double> box;
  std::vector<double> spectrum; // quadratic, cubic_reg
  std::optional<std::uint64_t> rotation_seed;
  double cubic_rho = 1.0;
  std::vector<double> tilt;
};

struct OracleConfig {
  NoiseKind noise = NoiseKind::AdditiveGaussian;
  double sigma = 0.0;
};

struct CompressorConfig {
  CompressorKind kind = CompressorKind::Identity;
  std::optional<std::size_t> k; // unset: balanced RandomK size
  std::uint32_t s = 1;
  int value_bits = 64;
};

struct PlannerConfig {
  double eps = 0.1;
  // Overrides of the objective's certified constants.
  std::optional<double> L;
  std::optional<double> rho;
  std::optional<double> f_lower;
  PlanConstants constants;
};

enum class StartMode { Origin, Uniform, Point };

struct StartConfig {
  StartMode mode = StartMode::Origin;
  double scale = 1.0; // uniform: half-width as a fraction of the box
  std::vector<double> point;
};

struct ExecutionConfig {
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  std::optional<std::uint64_t> iterations;
  bool reset_error = false;
  std::uint64_t record_stride = 1;
  std::size_t threads = 0; // 0 = OpenMP default
};

struct ClusterConfig {
  std::size_t workers = 1;
  std::vector<std::vector<double>> tilts; // per-worker tilt, explicit
  double tilt_scale = 0.0; // random zero-mean tilts when `tilts` is empty
  bool compress_downlink = false;
};

struct EscapeConfig {
  double min_rate = 0.9;
};

struct CouplingConfig {
  std::size_t seeds = 100;
  std::uint64_t horizon = 0;
  std::vector<std::uint64_t> sample_times;
  double max_fit_error = 0.1;
};

struct VerifyConfig {
  std::size_t dim = 100;
  std::size_t trials = 100000;
  std::size_t k = 10;
  std::uint32_t s = 1;
};

struct RunConfig {
  ObjectiveConfig objective;
  OracleConfig oracle;
  CompressorConfig compressor;
  PlannerConfig planner;
  StartConfig start;
  ExecutionConfig execution;
  ClusterConfig cluster;
  EscapeConfig escape;
  CouplingConfig coupling;
  VerifyConfig verify;
  std::string output_dir = "out";
};

/// Parses YAML text. Unknown keys, wrong types and out-of-range values raise
/// ConfigError with the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Everything one seed of an experiment needs, assembled from a config.
struct Setup {
  Objective objective;
  std::vector<StochasticOracle> workers; // one per simulated worker
  CompressorSpec compressor;
  ParamVector x0;
  HyperParams hp;
  ObjectiveConstants constants;
};

Objective build_objective(const ObjectiveConfig& cfg);
ParamVector initial_point(const RunConfig& cfg, const Objective& obj, std::uint64_t seed);
/// Balanced size when k is unset.
CompressorSpec build_compressor(const CompressorConfig& cfg, std::size_t d, double eps, double alpha);
/// Plans with f_max = f(x0) - f_lower on the averaged objective.
Setup make_setup(const RunConfig& cfg, std::uint64_t seed);

} // namespace csgd
