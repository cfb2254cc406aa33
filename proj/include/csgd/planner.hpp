#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "csgd/compressors.hpp"

namespace csgd {

/// Tuning knobs hiding the polylogarithmic factors of the parameter choice.
/// Unset values take the defaults below; eta and T may be pinned outright.
struct PlanConstants {
  std::optional<double> c_eta; // 0.25
  std::optional<double> c_I;   // 4 ln(d T)
  std::optional<double> c_R;   // 0.5
  std::optional<double> c_F;   // 0.05
  std::optional<double> c_r;   // 1.0
  double c_T = 1.0;
  std::optional<double> eta;
  std::optional<std::uint64_t> T;
};

struct PlannerInput {
  double eps = 0.0;
  double L = 0.0;
  double rho = 0.0;
  double sigma = 0.0;
  double ell_tilde = 0.0; // smoothness of the stochastic gradients
  bool lipschitz_sg = true; // alpha = 1 if true, d otherwise
  CompressorSpec compressor;
  double f_max = 0.0; // f(x0) - f_lower
  PlanConstants constants;
};

struct HyperParams {
  double eps = 0.0;
  double L = 0.0;
  double rho = 0.0;
  double sigma = 0.0;
  double ell_tilde = 0.0;
  std::size_t d = 0;
  double alpha = 1.0;
  double mu = 1.0;
  bool linear_compressor = true;

  double eta_sigma = 0.0;
  double eta_mu = 0.0; // +inf for mu = 1
  double eta = 0.0;
  bool eta_clamped = false; // eta was cut to the descent-lemma ceiling
  double I = 0.0;           // escape budget, real-valued
  double R = 0.0;
  double F = 0.0;
  double r = 0.0;
  double chi_sq = 0.0;
  std::uint64_t T = 0;
  double f_max = 0.0;

  double c_eta = 0.0;
  double c_I = 0.0;
  double c_R = 0.0;
  double c_F = 0.0;
  double c_r = 0.0;
  double c_T = 1.0;

  /// Length of one escape window in whole iterations, ceil(I).
  std::uint64_t escape_iterations() const;
  /// (1/(4L)) min(mu/sqrt(1-mu), 1)
  double eta_ceiling() const;
};

double eta_sigma(double eps, double L, double rho, double sigma, double ell_tilde, std::size_t d);
/// +inf when mu = 1; the sigma term is skipped when sigma = 0.
double eta_mu(double eps, double L, double rho, double sigma, double mu, std::size_t d, bool linear);

/// Step size, escape parameters, noise level and iteration budget.
/// Requires 0 < eps <= 1 and positive L, rho, ell_tilde.
HyperParams plan(const PlannerInput& in);

/// RandomK size balancing the iteration terms: ceil(d eps^(3/4) / sqrt(alpha)),
/// clamped to [1, d].
std::size_t balanced_random_k(std::size_t d, double eps, double alpha);

/// Order of the iteration count to reach an eps-SOSP, polylog factors dropped:
/// max(alpha/eps^4, sqrt(1-mu)/(mu eps^3), (1-mu)/(mu^2 eps^2.5) [x d if not linear]).
double iteration_order(double eps, double mu, double alpha, std::size_t d, bool linear);

struct CommEstimate {
  double iterations = 0.0;          // iteration_order for the compressor
  double baseline_iterations = 0.0; // iteration_order with mu = 1
  std::uint64_t bits_per_round = 0;
  std::uint64_t baseline_bits_per_round = 0;
  double total_bits = 0.0;
  double baseline_total_bits = 0.0;
  /// Total communication of uncompressed SGD divided by that of this compressor.
  double improvement = 1.0;
};

CommEstimate comm_estimate(const CompressorSpec& spec, double eps, double alpha, int value_bits);

} // namespace csgd
