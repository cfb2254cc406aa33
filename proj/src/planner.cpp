#include "csgd/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csgd/errors.hpp"

namespace csgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ParameterError(std::string("plan: ") + name + " must be positive and finite");
  }
}

double positive_constant(const std::optional<double>& v, double fallback, const char* name) {
  if (!v) {
    return fallback;
  }
  require_positive(*v, name);
  return *v;
}

} // namespace

std::uint64_t HyperParams::escape_iterations() const {
  return static_cast<std::uint64_t>(std::ceil(I));
}

double HyperParams::eta_ceiling() const {
  const double factor = mu >= 1.0 ? 1.0 : std::min(mu / std::sqrt(1.0 - mu), 1.0);
  return factor / (4.0 * L);
}

double eta_sigma(double eps, double L, double rho, double sigma, double ell_tilde, std::size_t d) {
  const double dd = static_cast<double>(d);
  const double s2 = sigma * sigma;
  return eps * eps / (L * (1.0 + dd * s2)) +
         std::min(eps * eps / (L * (1.0 + s2)), std::sqrt(rho * eps) / (ell_tilde * ell_tilde));
}

double eta_mu(double eps, double L, double rho, double sigma, double mu, std::size_t d,
              bool linear) {
  if (mu >= 1.0) {
    return kInf;
  }
  const double variance_term = sigma > 0.0 ? mu * eps / (std::sqrt(1.0 - mu) * L * sigma) : kInf;
  const double drift_term =
      linear ? mu * mu * std::sqrt(rho * eps) / ((1.0 - mu) * L * L)
             : mu * mu * std::sqrt(eps) / ((1.0 - mu) * L * L * static_cast<double>(d));
  return std::min(variance_term, drift_term);
}

HyperParams plan(const PlannerInput& in) {
  require_positive(in.eps, "eps");
  if (in.eps > 1.0) {
    throw ParameterError("plan: eps must not exceed 1 (rescale the objective)");
  }
  require_positive(in.L, "L");
  require_positive(in.rho, "rho");
  require_positive(in.ell_tilde, "ell_tilde");
  if (!std::isfinite(in.sigma) || in.sigma < 0.0) {
    throw ParameterError("plan: sigma must be finite and non-negative");
  }
  if (!std::isfinite(in.f_max) || in.f_max < 0.0) {
    throw ParameterError("plan: f_max must be finite and non-negative");
  }
  in.compressor.validate();
  require_positive(in.constants.c_T, "c_T");

  HyperParams hp;
  hp.eps = in.eps;
  hp.L = in.L;
  hp.rho = in.rho;
  hp.sigma = in.sigma;
  hp.ell_tilde = in.ell_tilde;
  hp.d = in.compressor.d;
  hp.alpha = in.lipschitz_sg ? 1.0 : static_cast<double>(hp.d);
  hp.mu = compression_factor(in.compressor);
  hp.linear_compressor = is_linear(in.compressor);
  hp.f_max = in.f_max;
  hp.c_T = in.constants.c_T;

  const PlanConstants& c = in.constants;
  hp.c_eta = positive_constant(c.c_eta, 0.25, "c_eta");
  hp.c_R = positive_constant(c.c_R, 0.5, "c_R");
  hp.c_F = positive_constant(c.c_F, 0.05, "c_F");
  hp.c_r = c.c_r ? *c.c_r : 1.0;
  if (!std::isfinite(hp.c_r) || hp.c_r < 0.0) {
    throw ParameterError("plan: c_r must be finite and non-negative");
  }

  hp.eta_sigma = eta_sigma(hp.eps, hp.L, hp.rho, hp.sigma, hp.ell_tilde, hp.d);
  hp.eta_mu = eta_mu(hp.eps, hp.L, hp.rho, hp.sigma, hp.mu, hp.d, hp.linear_compressor);
  if (c.eta) {
    require_positive(*c.eta, "eta");
    hp.eta = *c.eta;
  } else {
    hp.eta = hp.c_eta * std::min(hp.eta_sigma, hp.eta_mu);
    // The descent lemma needs eta strictly below its ceiling.
    const double ceiling = 0.999 * hp.eta_ceiling();
    if (hp.eta > ceiling) {
      hp.eta = ceiling;
      hp.eta_clamped = true;
    }
  }

  const double planned_T = std::ceil(hp.c_T * hp.f_max / (hp.eps * hp.eps * hp.eta));
  if (!(planned_T < 9.0e18)) {
    throw ParameterError("plan: iteration budget overflows; pin T explicitly");
  }
  hp.T = c.T ? *c.T : static_cast<std::uint64_t>(planned_T);

  const double dT = static_cast<double>(hp.d) * planned_T;
  hp.c_I = positive_constant(c.c_I, 4.0 * std::log(std::max(std::exp(1.0), dT)), "c_I");

  const double sqrt_rho_eps = std::sqrt(hp.rho * hp.eps);
  hp.I = hp.c_I / (hp.eta * sqrt_rho_eps);
  hp.R = hp.c_R * std::sqrt(hp.eps / hp.rho);
  hp.F = hp.c_F * std::sqrt(hp.eps * hp.eps * hp.eps / hp.rho);
  hp.r = hp.c_r * hp.eps / std::sqrt(hp.L * hp.eta);
  hp.chi_sq = hp.sigma * hp.sigma + hp.r * hp.r;
  return hp;
}

std::size_t balanced_random_k(std::size_t d, double eps, double alpha) {
  if (d == 0) {
    throw ParameterError("balanced_random_k: dimension must be positive");
  }
  require_positive(eps, "eps");
  require_positive(alpha, "alpha");
  const double k = std::ceil(static_cast<double>(d) * std::pow(eps, 0.75) / std::sqrt(alpha));
  return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(d)));
}

double iteration_order(double eps, double mu, double alpha, std::size_t d, bool linear) {
  require_positive(eps, "eps");
  double iters = alpha / std::pow(eps, 4.0);
  if (mu < 1.0) {
    iters = std::max(iters, std::sqrt(1.0 - mu) / (mu * eps * eps * eps));
    const double drift = (1.0 - mu) / (mu * mu * std::pow(eps, 2.5));
    iters = std::max(iters, linear ? drift : drift * static_cast<double>(d));
  }
  return iters;
}

CommEstimate comm_estimate(const CompressorSpec& spec, double eps, double alpha, int value_bits) {
  CommEstimate est;
  const CompressorSpec identity = CompressorSpec::identity(spec.d);
  est.iterations =
      iteration_order(eps, compression_factor(spec), alpha, spec.d, is_linear(spec));
  est.baseline_iterations = iteration_order(eps, 1.0, alpha, spec.d, true);
  est.bits_per_round = message_cost_bits(spec, value_bits);
  est.baseline_bits_per_round = message_cost_bits(identity, value_bits);
  est.total_bits = est.iterations * static_cast<double>(est.bits_per_round);
  est.baseline_total_bits = est.baseline_iterations * static_cast<double>(est.baseline_bits_per_round);
  est.improvement = est.baseline_total_bits / est.total_bits;
  return est;
}

} // namespace csgd
