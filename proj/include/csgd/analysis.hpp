#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csgd/optimizer.hpp"
#include "csgd/parallel.hpp"

namespace csgd {

struct StationarityReport {
  ParamVector point;
  double eps = 0.0;
  double rho = 0.0;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  bool is_fosp = false; // grad_norm <= eps
  bool is_sosp = false; // is_fosp and lambda_min >= -sqrt(rho eps)
};

/// Analytic gradient and Hessian at x; lambda_min by power iteration with
/// shift max(L, Gershgorin bound) and tolerance 1e-8 L. eps = 0 demands an exact
/// critical point.
StationarityReport certify(const Objective& obj, const ParamVector& x, double eps, double rho,
                           double L);

/// Fraction of points certified eps-SOSP. Throws ParameterError on an empty list.
double sosp_fraction(std::span<const Checkpoint> checkpoints, const Objective& obj, double eps,
                     double rho, double L, Exec exec = Exec::Serial);
double fosp_fraction(std::span<const Checkpoint> checkpoints, const Objective& obj, double eps);

/// beta_t = sqrt(sum_{i<t} (1 + eta gamma)^(2i)).
double beta(double eta_gamma, std::uint64_t t);

struct BetaBoundsReport {
  double eta_gamma = 0.0;
  std::uint64_t t_max = 0;
  std::uint64_t upper_violations = 0; // beta_t > (1+eta gamma)^t / sqrt(2 eta gamma)
  std::uint64_t lower_violations = 0; // beta_t < (1+eta gamma)^t / sqrt(6 eta gamma), t >= 2/(eta gamma)
  double max_recurrence_error = 0.0;  // relative, beta_{t+1}^2 - beta_t^2 = (1+eta gamma)^(2t)
  double min_upper_slack = 0.0;       // min over t of 1/(2 eta gamma) - s_t
  double min_lower_slack = 0.0;       // min over checked t of s_t - 1/(6 eta gamma)
  bool passed() const { return upper_violations == 0 && lower_violations == 0; }
};

/// Checks both bounds for t = 1..t_max on s_t = beta_t^2 / (1+eta gamma)^(2t),
/// which stays finite where beta_t itself overflows. eta_gamma must lie in (0, 1].
BetaBoundsReport check_beta_bounds(double eta_gamma, std::uint64_t t_max);

struct CouplingOptions {
  std::size_t seeds = 100;
  std::uint64_t base_seed = 1;
  std::uint64_t horizon = 0; // iterations; 0 = ceil(I)
  bool reset_error = false;
  /// Times at which f(x_t), f(x'_t) are kept per seed for distribution tests.
  std::vector<std::uint64_t> sample_times;
  Exec exec = Exec::Serial;
};

struct CouplingResult {
  double gamma = 0.0; // -lambda_min of the Hessian at x0
  ParamVector v1;
  std::uint64_t horizon = 0;
  // Seed means indexed by t = 0..horizon.
  std::vector<double> mean_xhat_norm;   // ||x'_t - x_t||
  std::vector<double> mean_yhat_norm;   // ||y'_t - y_t||
  std::vector<double> mean_abs_proj;    // |<v1, y'_t - y_t>|
  std::vector<double> beta;             // beta_t
  double max_bookkeeping_error = 0.0;   // max ||yhat - (xhat - eta ehat)|| / (1 + ||yhat||)
  double escape_rate = 0.0;             // either sequence leaves the R-ball around y_0
  double escape_rate_first = 0.0;
  double escape_rate_second = 0.0;
  std::vector<std::uint64_t> sample_times;
  // [time index][seed]
  std::vector<std::vector<double>> f_first;
  std::vector<std::vector<double>> f_second;
};

/// Paired runs from a strict saddle sharing theta_t and theta~_t, the second
/// using the artificial noise reflected along v1. Throws ParameterError unless
/// lambda_min(H(x0)) < -sqrt(rho eps)/2.
CouplingResult coupling_experiment(const GradientOracle& oracle, const CompressorSpec& spec,
                                   const HyperParams& hp, const ParamVector& x0,
                                   const CouplingOptions& opt);

struct GrowthFit {
  std::uint64_t t_begin = 0;
  std::uint64_t t_end = 0; // exclusive
  double slope = 0.0;      // least-squares slope of ln(series) against t
  double expected = 0.0;   // ln(1 + eta gamma)
  double relative_error = 0.0;
};

/// Fits the growth of mean |<v1, yhat_t>| from t = ceil(2/(eta gamma)) up to the
/// first t where mean ||yhat_t|| reaches R (or the horizon).
GrowthFit fit_growth(const CouplingResult& res, const HyperParams& hp);

struct MomentComparison {
  std::uint64_t t = 0;
  double mean_a = 0.0, mean_b = 0.0, mean_band = 0.0;
  double var_a = 0.0, var_b = 0.0, var_band = 0.0;
  bool passed = false;
};

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;
  bool passed = false; // statistic <= critical
};

/// Two-sample Kolmogorov-Smirnov test at the 1% level (c = 1.628).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Means and variances of two samples agree within 3 standard errors.
MomentComparison compare_moments(std::span<const double> a, std::span<const double> b);

/// Seed statistics of a scalar.
struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};
SampleStats sample_stats(std::span<const double> v);

struct BiasReport {
  std::vector<double> z; // per coordinate: mean of C(x)_i - x_i over its standard error
  double max_abs_z = 0.0;
  std::size_t outside = 0; // coordinates with |z| > 3
  bool passed() const { return outside == 0; }
};

/// Unbiasedness of a randomized compressor at a fixed input: draw i uses the
/// stream (seed, Trial, 1, i). A coordinate with zero spread must match exactly.
BiasReport compressor_bias(const CompressorSpec& spec, const ParamVector& x, std::size_t trials,
                           std::uint64_t seed, Exec exec = Exec::Serial);

struct DescentCheck {
  double lhs = 0.0; // sum_{t<T} ||grad f(x_t)||^2
  double rhs = 0.0; // 4 (f(y_0) - f(y_T)) / eta + eta chi^2 T (2L + 8 L^2 eta (1-mu)/mu^2)
  double slack() const { return rhs - lhs; }
};

/// Per-run form of the compressed descent inequality. `chi_sq` is the total
/// noise variance of the run (0 for deterministic runs).
DescentCheck descent_lemma_check(const RunTrace& trace, const HyperParams& hp, double chi_sq);

struct WindowReport {
  std::uint64_t worst_t = 0;
  double worst_slack = 0.0;
  double worst_band = 0.0; // 3 standard errors of the slack at worst_t
  bool passed = false;     // worst slack >= -band over all t
};

/// Seed-averaged improve-or-localize inequality for every window [0, t],
/// t <= min(I, T): f(y_0) - E f(y_t) >= E||y_t - y_0||^2/(8 eta t)
///   - eta^2 chi^2 t (L + 2 (1-mu) L^2 eta / mu^2) - eta chi^2.
/// Traces must be recorded with stride 1.
WindowReport improve_or_localize_check(std::span<const RunTrace> traces, const HyperParams& hp,
                                       double chi_sq);

/// Seed-averaged ||e_t||^2 <= 4 (1-mu)/mu^2 (max_{i<t} E||grad f(x_i)||^2 + chi^2).
/// Returns the largest ratio of the two sides (<= 1 means the bound held).
double error_bound_worst_ratio(std::span<const RunTrace> traces, const HyperParams& hp,
                               double chi_sq);

} // namespace csgd
