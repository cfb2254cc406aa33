#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "csgd/rng.hpp"

namespace csgd {

/// Dense real vector holding iterates, gradients, noise and error accumulators.
class ParamVector {
public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  ParamVector(std::initializer_list<double> values) : data_(values) {}
  explicit ParamVector(std::vector<double> values) : data_(std::move(values)) {}
  explicit ParamVector(std::span<const double> values) : data_(values.begin(), values.end()) {}

  std::size_t dim() const noexcept { return data_.size(); }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool all_finite() const noexcept;
  void fill(double value) noexcept;

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double a) noexcept;

  bool operator==(const ParamVector&) const = default;

private:
  std::vector<double> data_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double a, ParamVector x);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> x);
double norm_sq(std::span<const double> x);
double norm1(std::span<const double> x);
double norm_inf(std::span<const double> x);
/// ||a - b||
double distance(std::span<const double> a, std::span<const double> b);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

inline double dot(const ParamVector& a, const ParamVector& b) { return dot(a.span(), b.span()); }
inline double norm(const ParamVector& x) { return norm(x.span()); }
inline double norm_sq(const ParamVector& x) { return norm_sq(x.span()); }

/// Square row-major matrix.
class DenseMatrix {
public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t dim, double fill = 0.0) : dim_(dim), a_(dim * dim, fill) {}

  static DenseMatrix identity(std::size_t dim);
  static DenseMatrix diagonal(std::span<const double> diag);

  std::size_t dim() const noexcept { return dim_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * dim_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * dim_ + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return {a_.data() + i * dim_, dim_}; }

  /// out = A x
  void apply(std::span<const double> x, std::span<double> out) const;
  ParamVector apply(const ParamVector& x) const;
  /// x^T A x
  double quadratic_form(std::span<const double> x) const;

  DenseMatrix operator*(const DenseMatrix& other) const;
  DenseMatrix transpose() const;
  DenseMatrix& operator*=(double a) noexcept;

  double max_abs() const noexcept;
  /// max |A_ij - A_ji| <= rel_tol * max |A|
  bool is_symmetric(double rel_tol = 1e-12) const noexcept;
  /// Gershgorin upper bound on the largest eigenvalue of a symmetric matrix.
  double gershgorin_upper() const noexcept;

  bool operator==(const DenseMatrix&) const = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> a_;
};

/// Vector of i.i.d. N(0, per_coord_std^2) coordinates.
ParamVector gaussian_vector(SeededRng& rng, std::size_t d, double per_coord_std);
void fill_gaussian(SeededRng& rng, double per_coord_std, std::span<double> out);

/// Uniformly random orthogonal matrix (Gram-Schmidt on a Gaussian matrix).
DenseMatrix random_orthogonal(std::size_t d, std::uint64_t seed);

struct EigenPair {
  double value = 0.0;
  ParamVector vector;
  double residual = 0.0; // ||H v - value v||
  int iterations = 0;
};

/// Smallest eigenpair of a symmetric H by power iteration on (shift I - H).
/// `shift` must dominate the spectrum (callers pass the smoothness constant L).
/// The iteration is accelerated by repeated squaring of the shifted matrix, then
/// refined by plain power steps until ||H v - lambda v|| <= tol (|lambda| + 1).
/// Throws ConvergenceError if max_iter refinement steps do not reach tol.
EigenPair min_eigenpair(const DenseMatrix& H, double shift, double tol, int max_iter = 10000);

/// Spectral norm of a symmetric matrix.
double spectral_norm(const DenseMatrix& H);

using ScalarFn = std::function<double(const ParamVector&)>;
using VectorFn = std::function<ParamVector(const ParamVector&)>;

/// Central differences with per-coordinate step h (1 + |x_i|).
ParamVector fd_gradient(const ScalarFn& f, const ParamVector& x, double h = 1e-5);
/// Column j holds the central difference of `grad` along e_j.
DenseMatrix fd_jacobian(const VectorFn& grad, const ParamVector& x, double h = 1e-5);

} // namespace csgd
