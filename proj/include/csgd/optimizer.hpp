#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csgd/compressors.hpp"
#include "csgd/linalg.hpp"
#include "csgd/objectives.hpp"
#include "csgd/planner.hpp"

namespace csgd {

/// Iterate x_t, error accumulator e_t and the anchor x_{t'} of the reset test.
struct OptimizerState {
  std::uint64_t t = 0;
  ParamVector x;
  ParamVector e;
  std::uint64_t t_prime = 0;
  ParamVector anchor;

  static OptimizerState start(const ParamVector& x0);
};

/// y = x - eta e
ParamVector corrected_iterate(const OptimizerState& state, const HyperParams& hp);

/// t - t' > I or ||anchor - y|| > R
bool reset_due(std::uint64_t t, std::uint64_t t_prime, const ParamVector& anchor,
               const ParamVector& y, const HyperParams& hp);

/// When reset_error is set and a reset is due: x <- x - eta e, e <- 0,
/// t' <- t, anchor <- x. Returns whether the reset fired.
bool maybe_reset(OptimizerState& state, const HyperParams& hp, bool reset_error);

struct StepOptions {
  std::uint64_t seed = 0;
  int value_bits = 64;
  /// Reflect the artificial noise along this unit vector, xi <- xi - 2<v, xi> v.
  const ParamVector* reflect = nullptr;
};

/// Quantities drawn and sent during one step.
struct StepDetail {
  ParamVector stochastic_grad; // grad F(x_t, theta_t)
  ParamVector noise;           // xi_t
  ParamVector compressed;      // g_t
  std::uint64_t cost_bits = 0;
};

/// Draws xi_t (per-coordinate std r/sqrt d) from the shared noise stream.
void artificial_noise(std::uint64_t seed, std::uint64_t t, const HyperParams& hp, ParamVector& out);
/// xi - 2 <v, xi> v
void reflect_along(const ParamVector& v, ParamVector& xi);

/// One iteration without the reset check: u = e + grad F(x, theta_t) + xi_t,
/// g = C(u, theta~_t), x <- x - eta g, e <- u - g, t <- t + 1.
StepDetail step(OptimizerState& state, const GradientOracle& oracle, const CompressorSpec& spec,
                const HyperParams& hp, const StepOptions& opt = {});

struct IterRecord {
  std::uint64_t t = 0;
  double f = 0.0;   // f(x_t)
  double f_y = 0.0; // f(y_t)
  double grad_norm = 0.0;
  double err_norm = 0.0;
  double y_drift = 0.0; // ||y_t - y_0||
  std::uint64_t bits = 0; // sent during iteration t
  bool reset = false;     // a reset fired at the top of iteration t
};

struct Checkpoint {
  std::uint64_t t = 0;
  ParamVector x;
};

struct RunOptions {
  bool reset_error = false;
  std::uint64_t seed = 0;
  int value_bits = 64;
  /// Keep every stride-th record; t = 0, the last record and resets are always kept.
  std::uint64_t record_stride = 1;
  /// Stop as soon as f(x_t) falls below this value.
  std::optional<double> stop_below;
  /// Iteration count; defaults to hp.T.
  std::optional<std::uint64_t> iterations;
  /// Store x_t alongside each kept record.
  bool keep_iterates = false;
};

struct RunTrace {
  std::vector<IterRecord> records;
  std::vector<ParamVector> iterates; // x_t per record, with keep_iterates
  /// x at every reset (reset_error) or every ceil(I) iterations, plus x_0.
  std::vector<Checkpoint> checkpoints;
  std::uint64_t iterations = 0; // steps taken
  std::uint64_t total_bits = 0;
  std::uint64_t resets = 0;
  /// Among x_0 .. x_{iterations-1}: how many have ||grad f|| <= eps.
  std::uint64_t fosp_visited = 0;
  double grad_sq_sum = 0.0; // sum of ||grad f(x_t)||^2 over the same range
  bool stopped_early = false;
  bool aborted = false;
  std::string abort_reason;
  ParamVector x_final;
  ParamVector e_final;
  ParamVector y_final;

  double fosp_fraction() const;
};

/// Perturbed compressed SGD with error feedback from x0.
/// NaN/Inf or a point leaving the objective's domain aborts the run; the
/// trace then ends with the last valid record and carries the reason.
RunTrace run(const GradientOracle& oracle, const CompressorSpec& spec, const HyperParams& hp,
             const ParamVector& x0, const RunOptions& opt = {});

} // namespace csgd
