#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csgd/linalg.hpp"
#include "csgd/rng.hpp"

namespace csgd {

enum class ObjectiveKind { Quadratic, CubicReg, DoubleWell };

std::string to_string(ObjectiveKind kind);
/// Accepts "quadratic", "cubic_reg", "double_well".
ObjectiveKind objective_kind_from_string(const std::string& name);

struct Evaluation {
  double f = 0.0;
  ParamVector grad;
  DenseMatrix hess;
};

struct ObjectiveConstants {
  double L = 0.0;       // smoothness on the domain
  double rho = 0.0;     // Hessian-Lipschitz constant on the domain
  double f_lower = 0.0; // lower bound of f on the domain
};

/// Smooth synthetic test function, optionally tilted by a linear term b^T x.
///   Quadratic   f = 1/2 x^T H x
///   CubicReg    f = 1/2 x^T H x + (rho/6) ||x||^3
///   DoubleWell  f = sum_i (x_i^4/4 - x_i^2/2)
/// CubicReg and DoubleWell are only L-smooth on a bounded region, so points
/// outside the box ||x||_inf <= box() raise DomainError. Quadratics have
/// global constants and the box only enters their lower bound.
class Objective {
public:
  static constexpr double kDefaultBox = 10.0;

  static Objective quadratic(DenseMatrix H);
  /// H = Q diag(spectrum) Q^T, Q a random rotation when `rotation_seed` is set.
  static Objective quadratic_spectrum(std::span<const double> spectrum,
                                      std::optional<std::uint64_t> rotation_seed = std::nullopt);
  static Objective cubic_reg(DenseMatrix H, double rho);
  static Objective double_well(std::size_t d);

  Objective with_box(double box) const;
  Objective with_tilt(ParamVector b) const;

  ObjectiveKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return d_; }
  double box() const noexcept { return box_; }
  /// Quadratic part (Quadratic, CubicReg); empty for DoubleWell.
  const DenseMatrix& matrix() const noexcept { return *H_; }
  double cubic_rho() const noexcept { return cubic_rho_; }
  const ParamVector& tilt() const noexcept { return tilt_; }

  bool in_domain(std::span<const double> x) const;
  /// Throws DomainError when x is outside the enforced box.
  void check_domain(std::span<const double> x) const;

  double value(std::span<const double> x) const;
  double value(const ParamVector& x) const { return value(x.span()); }
  void gradient(std::span<const double> x, std::span<double> out) const;
  ParamVector gradient(const ParamVector& x) const;
  DenseMatrix hessian(const ParamVector& x) const;
  /// Analytic (f, grad, Hessian); checks the domain first.
  Evaluation eval(const ParamVector& x) const;

  /// Closed-form constants on the domain. For DoubleWell `domain_radius` is the
  /// box half-width, for CubicReg a Euclidean radius; quadratics ignore it.
  ObjectiveConstants certified_constants(double domain_radius) const;
  /// Radius matching box(): B for DoubleWell, sqrt(d) B for CubicReg.
  double box_radius() const;

private:
  Objective() = default;
  void cache_spectrum();

  ObjectiveKind kind_ = ObjectiveKind::DoubleWell;
  std::size_t d_ = 0;
  double box_ = kDefaultBox;
  std::shared_ptr<const DenseMatrix> H_;
  double H_norm_ = 0.0;
  double H_lambda_min_ = 0.0;
  double cubic_rho_ = 0.0;
  ParamVector tilt_; // empty = no tilt
};

enum class NoiseKind { AdditiveGaussian, CoordinateSampling };

std::string to_string(NoiseKind kind);
/// Accepts "additive_gaussian", "coordinate_sampling".
NoiseKind noise_kind_from_string(const std::string& name);

/// Unbiased stochastic gradient of an objective.
///   AdditiveGaussian:   grad f(x) + (sigma/sqrt d) z, so E||noise||^2 = sigma^2.
///   CoordinateSampling: d * d_j f(x) e_j for uniform j.
class StochasticOracle {
public:
  StochasticOracle(Objective objective, NoiseKind kind, double sigma);

  const Objective& objective() const noexcept { return objective_; }
  NoiseKind noise_kind() const noexcept { return kind_; }
  double sigma() const noexcept { return sigma_; }

  void sample_gradient(std::span<const double> x, SeededRng& rng, std::span<double> out) const;
  ParamVector sample_gradient(const ParamVector& x, SeededRng& rng) const;

  /// True when each F(., theta) shares the smoothness of f (alpha = 1).
  bool lipschitz_stochastic() const noexcept { return kind_ == NoiseKind::AdditiveGaussian; }
  /// Smoothness of the individual stochastic gradients given that of f.
  double stochastic_lipschitz(double L) const noexcept;

private:
  Objective objective_;
  NoiseKind kind_;
  double sigma_;
};

/// Stochastic gradient at iteration t of a run seeded by `seed`. Implementations
/// draw theta_t from their own streams so the draw depends only on (seed, t).
class GradientOracle {
public:
  virtual ~GradientOracle() = default;
  /// The objective whose gradient the oracle is unbiased for.
  virtual const Objective& objective() const = 0;
  virtual void gradient(const ParamVector& x, std::uint64_t seed, std::uint64_t t,
                        ParamVector& out) const = 0;
};

/// A single stochastic oracle reading the stream of worker 0.
class SingleOracle final : public GradientOracle {
public:
  explicit SingleOracle(StochasticOracle oracle) : oracle_(std::move(oracle)) {}
  const Objective& objective() const override { return oracle_.objective(); }
  void gradient(const ParamVector& x, std::uint64_t seed, std::uint64_t t,
                ParamVector& out) const override;
  const StochasticOracle& oracle() const noexcept { return oracle_; }

private:
  StochasticOracle oracle_;
};

/// Average of W worker oracles, worker i reading its own stream. Workers must
/// share the base objective and differ at most in their tilt; the averaged
/// objective carries the mean tilt.
class AveragedOracle final : public GradientOracle {
public:
  explicit AveragedOracle(std::vector<StochasticOracle> workers);
  const Objective& objective() const override { return mean_; }
  void gradient(const ParamVector& x, std::uint64_t seed, std::uint64_t t,
                ParamVector& out) const override;
  const std::vector<StochasticOracle>& workers() const noexcept { return workers_; }

private:
  std::vector<StochasticOracle> workers_;
  Objective mean_;
};

} // namespace csgd
