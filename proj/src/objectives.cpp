#include "csgd/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "csgd/errors.hpp"

namespace csgd {

namespace {

void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ParameterError(std::string(what) + ": dimension " + std::to_string(got) +
                         " does not match objective dimension " + std::to_string(expected));
  }
}

} // namespace

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
  case ObjectiveKind::Quadratic:
    return "quadratic";
  case ObjectiveKind::CubicReg:
    return "cubic_reg";
  case ObjectiveKind::DoubleWell:
    return "double_well";
  }
  return "unknown";
}

ObjectiveKind objective_kind_from_string(const std::string& name) {
  for (auto k : {ObjectiveKind::Quadratic, ObjectiveKind::CubicReg, ObjectiveKind::DoubleWell}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ParameterError("unknown objective kind '" + name + "'");
}

void Objective::cache_spectrum() {
  const DenseMatrix& H = *H_;
  if (!H.is_symmetric()) {
    throw ParameterError("objective: H must be symmetric");
  }
  H_norm_ = spectral_norm(H);
  const double shift = std::max(H.gershgorin_upper(), 0.0);
  H_lambda_min_ = min_eigenpair(H, shift, 1e-12).value;
}

Objective Objective::quadratic(DenseMatrix H) {
  if (H.dim() == 0) {
    throw ParameterError("quadratic: empty matrix");
  }
  Objective o;
  o.kind_ = ObjectiveKind::Quadratic;
  o.d_ = H.dim();
  o.H_ = std::make_shared<const DenseMatrix>(std::move(H));
  o.cache_spectrum();
  return o;
}

Objective Objective::quadratic_spectrum(std::span<const double> spectrum,
                                        std::optional<std::uint64_t> rotation_seed) {
  if (spectrum.empty()) {
    throw ParameterError("quadratic: empty spectrum");
  }
  DenseMatrix H = DenseMatrix::diagonal(spectrum);
  if (rotation_seed) {
    const DenseMatrix Q = random_orthogonal(spectrum.size(), *rotation_seed);
    H = Q * H * Q.transpose();
    // Remove rounding asymmetry so the symmetry invariant holds exactly.
    for (std::size_t i = 0; i < H.dim(); ++i) {
      for (std::size_t j = i + 1; j < H.dim(); ++j) {
        const double m = 0.5 * (H(i, j) + H(j, i));
        H(i, j) = m;
        H(j, i) = m;
      }
    }
  }
  return quadratic(std::move(H));
}

Objective Objective::cubic_reg(DenseMatrix H, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw ParameterError("cubic_reg: rho must be positive");
  }
  Objective o = quadratic(std::move(H));
  o.kind_ = ObjectiveKind::CubicReg;
  o.cubic_rho_ = rho;
  return o;
}

Objective Objective::double_well(std::size_t d) {
  if (d == 0) {
    throw ParameterError("double_well: dimension must be positive");
  }
  Objective o;
  o.kind_ = ObjectiveKind::DoubleWell;
  o.d_ = d;
  o.H_ = std::make_shared<const DenseMatrix>();
  return o;
}

Objective Objective::with_box(double box) const {
  if (!(box > 0.0) || !std::isfinite(box)) {
    throw ParameterError("objective: box must be positive and finite");
  }
  Objective o = *this;
  o.box_ = box;
  return o;
}

Objective Objective::with_tilt(ParamVector b) const {
  require_dim(d_, b.dim(), "objective tilt");
  if (!b.all_finite()) {
    throw ParameterError("objective: tilt must be finite");
  }
  Objective o = *this;
  o.tilt_ = std::move(b);
  return o;
}

bool Objective::in_domain(std::span<const double> x) const {
  if (kind_ == ObjectiveKind::Quadratic) {
    return true;
  }
  return norm_inf(x) <= box_;
}

void Objective::check_domain(std::span<const double> x) const {
  require_dim(d_, x.size(), "objective");
  if (!in_domain(x)) {
    throw DomainError(to_string(kind_) + ": point with ||x||_inf = " + std::to_string(norm_inf(x)) +
                      " lies outside the box of half-width " + std::to_string(box_));
  }
}

double Objective::value(std::span<const double> x) const {
  check_domain(x);
  double f = 0.0;
  switch (kind_) {
  case ObjectiveKind::Quadratic:
    f = 0.5 * H_->quadratic_form(x);
    break;
  case ObjectiveKind::CubicReg: {
    const double n = norm(x);
    f = 0.5 * H_->quadratic_form(x) + cubic_rho_ / 6.0 * n * n * n;
    break;
  }
  case ObjectiveKind::DoubleWell:
    for (double v : x) {
      const double v2 = v * v;
      f += 0.25 * v2 * v2 - 0.5 * v2;
    }
    break;
  }
  if (tilt_.dim() != 0) {
    f += dot(tilt_.span(), x);
  }
  return f;
}

void Objective::gradient(std::span<const double> x, std::span<double> out) const {
  check_domain(x);
  require_dim(d_, out.size(), "objective gradient output");
  switch (kind_) {
  case ObjectiveKind::Quadratic:
    H_->apply(x, out);
    break;
  case ObjectiveKind::CubicReg: {
    H_->apply(x, out);
    const double c = 0.5 * cubic_rho_ * norm(x);
    axpy(c, x, out);
    break;
  }
  case ObjectiveKind::DoubleWell:
    for (std::size_t i = 0; i < d_; ++i) {
      out[i] = x[i] * x[i] * x[i] - x[i];
    }
    break;
  }
  if (tilt_.dim() != 0) {
    axpy(1.0, tilt_.span(), out);
  }
}

ParamVector Objective::gradient(const ParamVector& x) const {
  ParamVector g(d_);
  gradient(x.span(), g.span());
  return g;
}

DenseMatrix Objective::hessian(const ParamVector& x) const {
  check_domain(x.span());
  switch (kind_) {
  case ObjectiveKind::Quadratic:
    return *H_;
  case ObjectiveKind::CubicReg: {
    // (rho/2)(||x|| I + x x^T / ||x||); the second term vanishes at the origin.
    DenseMatrix Hx = *H_;
    const double n = norm(x);
    if (n > 0.0) {
      const double c = 0.5 * cubic_rho_;
      for (std::size_t i = 0; i < d_; ++i) {
        for (std::size_t j = 0; j < d_; ++j) {
          Hx(i, j) += c * x[i] * x[j] / n;
        }
        Hx(i, i) += c * n;
      }
    }
    return Hx;
  }
  case ObjectiveKind::DoubleWell: {
    DenseMatrix Hx(d_);
    for (std::size_t i = 0; i < d_; ++i) {
      Hx(i, i) = 3.0 * x[i] * x[i] - 1.0;
    }
    return Hx;
  }
  }
  return {};
}

Evaluation Objective::eval(const ParamVector& x) const {
  return {value(x), gradient(x), hessian(x)};
}

double Objective::box_radius() const {
  if (kind_ == ObjectiveKind::CubicReg) {
    return std::sqrt(static_cast<double>(d_)) * box_;
  }
  return box_;
}

ObjectiveConstants Objective::certified_constants(double domain_radius) const {
  if (!(domain_radius > 0.0)) {
    throw ParameterError("certified_constants: domain radius must be positive");
  }
  ObjectiveConstants c;
  const double dd = static_cast<double>(d_);
  switch (kind_) {
  case ObjectiveKind::Quadratic:
    c.L = H_norm_;
    c.rho = 0.0;
    c.f_lower = std::min(0.0, 0.5 * H_lambda_min_ * dd * box_ * box_);
    break;
  case ObjectiveKind::CubicReg: {
    c.L = H_norm_ + cubic_rho_ * domain_radius;
    c.rho = cubic_rho_;
    // min over r >= 0 of lambda_min r^2/2 + rho r^3/6
    const double lm = H_lambda_min_;
    c.f_lower = lm < 0.0 ? 2.0 / 3.0 * lm * lm * lm / (cubic_rho_ * cubic_rho_) : 0.0;
    break;
  }
  case ObjectiveKind::DoubleWell:
    c.L = std::max(3.0 * domain_radius * domain_radius - 1.0, 2.0);
    c.rho = 6.0 * domain_radius;
    c.f_lower = -0.25 * dd;
    break;
  }
  if (tilt_.dim() != 0) {
    c.f_lower -= norm1(tilt_.span()) * box_;
  }
  return c;
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::AdditiveGaussian ? "additive_gaussian" : "coordinate_sampling";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "additive_gaussian") {
    return NoiseKind::AdditiveGaussian;
  }
  if (name == "coordinate_sampling") {
    return NoiseKind::CoordinateSampling;
  }
  throw ParameterError("unknown noise kind '" + name + "'");
}

StochasticOracle::StochasticOracle(Objective objective, NoiseKind kind, double sigma)
    : objective_(std::move(objective)), kind_(kind), sigma_(sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw ParameterError("oracle: sigma must be finite and non-negative");
  }
}

void StochasticOracle::sample_gradient(std::span<const double> x, SeededRng& rng,
                                       std::span<double> out) const {
  objective_.gradient(x, out);
  const std::size_t d = objective_.dim();
  if (kind_ == NoiseKind::AdditiveGaussian) {
    if (sigma_ > 0.0) {
      const double s = sigma_ / std::sqrt(static_cast<double>(d));
      for (double& v : out) {
        v += s * rng.normal();
      }
    }
    return;
  }
  const auto j = static_cast<std::size_t>(rng.below(d));
  const double gj = static_cast<double>(d) * out[j];
  std::fill(out.begin(), out.end(), 0.0);
  out[j] = gj;
}

ParamVector StochasticOracle::sample_gradient(const ParamVector& x, SeededRng& rng) const {
  ParamVector g(objective_.dim());
  sample_gradient(x.span(), rng, g.span());
  return g;
}

double StochasticOracle::stochastic_lipschitz(double L) const noexcept {
  return kind_ == NoiseKind::AdditiveGaussian ? L : static_cast<double>(objective_.dim()) * L;
}

void SingleOracle::gradient(const ParamVector& x, std::uint64_t seed, std::uint64_t t,
                            ParamVector& out) const {
  SeededRng rng = SeededRng::for_stream(seed, Purpose::StochasticGradient, 0, t);
  oracle_.sample_gradient(x.span(), rng, out.span());
}

namespace {

Objective mean_objective(const std::vector<StochasticOracle>& workers) {
  if (workers.empty()) {
    throw ParameterError("averaged oracle: at least one worker required");
  }
  const Objective& base = workers.front().objective();
  ParamVector mean_tilt(base.dim());
  bool any_tilt = false;
  for (const auto& w : workers) {
    require_dim(base.dim(), w.objective().dim(), "averaged oracle worker");
    if (w.objective().kind() != base.kind()) {
      throw ParameterError("averaged oracle: workers must share the objective kind");
    }
    if (w.objective().tilt().dim() != 0) {
      mean_tilt += w.objective().tilt();
      any_tilt = true;
    }
  }
  if (!any_tilt) {
    return base;
  }
  mean_tilt *= 1.0 / static_cast<double>(workers.size());
  return base.with_tilt(std::move(mean_tilt));
}

} // namespace

AveragedOracle::AveragedOracle(std::vector<StochasticOracle> workers)
    : workers_(std::move(workers)), mean_(mean_objective(workers_)) {}

void AveragedOracle::gradient(const ParamVector& x, std::uint64_t seed, std::uint64_t t,
                              ParamVector& out) const {
  ParamVector g(out.dim());
  out.fill(0.0);
  for (std::size_t i = 0; i < workers_.size(); ++i) {
    SeededRng rng = SeededRng::for_stream(seed, Purpose::StochasticGradient, i, t);
    workers_[i].sample_gradient(x.span(), rng, g.span());
    out += g;
  }
  out *= 1.0 / static_cast<double>(workers_.size());
}

} // namespace csgd
