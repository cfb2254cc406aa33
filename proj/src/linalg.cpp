#include "csgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "csgd/errors.hpp"

namespace csgd {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw ParameterError(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

// Unit vector spanning the dominant eigenspace of a symmetric matrix whose
// dominant eigenvalue is its largest in magnitude. Repeated squaring raises the
// matrix to the power 2^m, so eigen-directions with relative gap g decay like
// (1 - g)^(2^m).
ParamVector dominant_direction(const DenseMatrix& B) {
  const std::size_t d = B.dim();
  DenseMatrix P = B;
  P *= 1.0 / B.max_abs();
  for (int m = 0; m < 64; ++m) {
    DenseMatrix Q = P * P;
    const double qs = Q.max_abs();
    if (qs == 0.0) {
      break;
    }
    Q *= 1.0 / qs;
    double diff = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        diff = std::max(diff, std::abs(Q(i, j) - P(i, j)));
      }
    }
    P = std::move(Q);
    if (diff <= 1e-15) {
      break;
    }
  }
  // P is (numerically) a scaled projector; its largest column lies in the range.
  std::size_t best = 0;
  double best_norm = -1.0;
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      s += P(i, j) * P(i, j);
    }
    if (s > best_norm) {
      best_norm = s;
      best = j;
    }
  }
  ParamVector v(d);
  for (std::size_t i = 0; i < d; ++i) {
    v[i] = P(i, best);
  }
  const double n = norm(v);
  if (n == 0.0) {
    v.fill(0.0);
    v[best] = 1.0;
    return v;
  }
  v *= 1.0 / n;
  return v;
}

} // namespace

bool ParamVector::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void ParamVector::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_dim(dim(), other.dim(), "ParamVector::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] += other.data_[i];
  }
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_dim(dim(), other.dim(), "ParamVector::operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) {
    data_[i] -= other.data_[i];
  }
  return *this;
}

ParamVector& ParamVector::operator*=(double a) noexcept {
  for (double& v : data_) {
    v *= a;
  }
  return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double a, ParamVector x) { return x *= a; }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double norm_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    s += v * v;
  }
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(norm_sq(x)); }

double norm1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    s += std::abs(v);
  }
  return s;
}

double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) {
    m = std::max(m, std::abs(v));
  }
  return m;
}

double distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  require_same_dim(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] += a * x[i];
  }
}

DenseMatrix DenseMatrix::identity(std::size_t dim) {
  DenseMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) {
    m(i, i) = diag[i];
  }
  return m;
}

void DenseMatrix::apply(std::span<const double> x, std::span<double> out) const {
  require_same_dim(dim_, x.size(), "DenseMatrix::apply");
  require_same_dim(dim_, out.size(), "DenseMatrix::apply");
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* r = a_.data() + i * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      s += r[j] * x[j];
    }
    out[i] = s;
  }
}

ParamVector DenseMatrix::apply(const ParamVector& x) const {
  ParamVector out(dim_);
  apply(x.span(), out.span());
  return out;
}

double DenseMatrix::quadratic_form(std::span<const double> x) const {
  require_same_dim(dim_, x.size(), "DenseMatrix::quadratic_form");
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* r = a_.data() + i * dim_;
    double ri = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      ri += r[j] * x[j];
    }
    s += x[i] * ri;
  }
  return s;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& other) const {
  require_same_dim(dim_, other.dim_, "DenseMatrix::operator*");
  DenseMatrix out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t k = 0; k < dim_; ++k) {
      const double aik = (*this)(i, k);
      if (aik == 0.0) {
        continue;
      }
      for (std::size_t j = 0; j < dim_; ++j) {
        out(i, j) += aik * other(k, j);
      }
    }
  }
  return out;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      out(j, i) = (*this)(i, j);
    }
  }
  return out;
}

DenseMatrix& DenseMatrix::operator*=(double a) noexcept {
  for (double& v : a_) {
    v *= a;
  }
  return *this;
}

double DenseMatrix::max_abs() const noexcept { return norm_inf(a_); }

bool DenseMatrix::is_symmetric(double rel_tol) const noexcept {
  const double bound = rel_tol * max_abs();
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i + 1; j < dim_; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > bound) {
        return false;
      }
    }
  }
  return true;
}

double DenseMatrix::gershgorin_upper() const noexcept {
  double bound = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dim_; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      if (j != i) {
        off += std::abs((*this)(i, j));
      }
    }
    bound = std::max(bound, (*this)(i, i) + off);
  }
  return bound;
}

void fill_gaussian(SeededRng& rng, double per_coord_std, std::span<double> out) {
  if (!std::isfinite(per_coord_std) || per_coord_std < 0.0) {
    throw ParameterError("gaussian_vector: std must be finite and non-negative");
  }
  if (per_coord_std == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (double& v : out) {
    v = per_coord_std * rng.normal();
  }
}

ParamVector gaussian_vector(SeededRng& rng, std::size_t d, double per_coord_std) {
  if (d == 0) {
    throw ParameterError("gaussian_vector: dimension must be positive");
  }
  ParamVector out(d);
  fill_gaussian(rng, per_coord_std, out.span());
  return out;
}

DenseMatrix random_orthogonal(std::size_t d, std::uint64_t seed) {
  SeededRng rng(seed, SeededRng::stream_id(Purpose::Auxiliary, 0, d));
  std::vector<ParamVector> cols;
  cols.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    ParamVector v = gaussian_vector(rng, d, 1.0);
    // Two passes of modified Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : cols) {
        const double c = dot(q, v);
        axpy(-c, q.span(), v.span());
      }
    }
    v *= 1.0 / norm(v);
    cols.push_back(std::move(v));
  }
  DenseMatrix Q(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      Q(i, j) = cols[j][i];
    }
  }
  return Q;
}

EigenPair min_eigenpair(const DenseMatrix& H, double shift, double tol, int max_iter) {
  const std::size_t d = H.dim();
  if (d == 0) {
    throw ParameterError("min_eigenpair: empty matrix");
  }
  if (!(tol > 0.0) || max_iter <= 0) {
    throw ParameterError("min_eigenpair: tol and max_iter must be positive");
  }
  if (!H.is_symmetric()) {
    throw ParameterError("min_eigenpair: matrix is not symmetric");
  }
  DenseMatrix B(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      B(i, j) = (i == j ? shift : 0.0) - H(i, j);
    }
  }

  EigenPair out;
  if (B.max_abs() == 0.0) {
    // H = shift * I: every unit vector is an eigenvector.
    out.value = shift;
    out.vector = ParamVector(d);
    out.vector[0] = 1.0;
    return out;
  }

  ParamVector v = dominant_direction(B);
  ParamVector hv(d);
  ParamVector bv(d);
  for (int it = 0;; ++it) {
    H.apply(v.span(), hv.span());
    const double lambda = dot(v, hv);
    double res = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = hv[i] - lambda * v[i];
      res += r * r;
    }
    res = std::sqrt(res);
    if (res <= tol * (std::abs(lambda) + 1.0)) {
      out.value = lambda;
      out.vector = std::move(v);
      out.residual = res;
      out.iterations = it;
      return out;
    }
    if (it >= max_iter) {
      throw ConvergenceError("min_eigenpair: no convergence after " + std::to_string(max_iter) +
                                 " iterations (residual " + std::to_string(res) + ")",
                             res);
    }
    B.apply(v.span(), bv.span());
    const double n = norm(bv);
    if (n == 0.0) {
      throw ConvergenceError("min_eigenpair: iterate collapsed to zero", res);
    }
    for (std::size_t i = 0; i < d; ++i) {
      v[i] = bv[i] / n;
    }
  }
}

double spectral_norm(const DenseMatrix& H) {
  if (H.max_abs() == 0.0) {
    return 0.0;
  }
  const DenseMatrix H2 = H * H;
  const ParamVector v = dominant_direction(H2);
  return norm(H.apply(v));
}

ParamVector fd_gradient(const ScalarFn& f, const ParamVector& x, double h) {
  if (!(h > 0.0)) {
    throw ParameterError("fd_gradient: step must be positive");
  }
  ParamVector g(x.dim());
  ParamVector probe = x;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double step = h * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
    if (!std::isfinite(g[i])) {
      throw NonFiniteError("fd_gradient: non-finite evaluation at coordinate " +
                           std::to_string(i));
    }
  }
  return g;
}

DenseMatrix fd_jacobian(const VectorFn& grad, const ParamVector& x, double h) {
  if (!(h > 0.0)) {
    throw ParameterError("fd_jacobian: step must be positive");
  }
  const std::size_t d = x.dim();
  DenseMatrix J(d);
  ParamVector probe = x;
  for (std::size_t j = 0; j < d; ++j) {
    const double step = h * (1.0 + std::abs(x[j]));
    probe[j] = x[j] + step;
    const ParamVector gp = grad(probe);
    probe[j] = x[j] - step;
    const ParamVector gm = grad(probe);
    probe[j] = x[j];
    for (std::size_t i = 0; i < d; ++i) {
      J(i, j) = (gp[i] - gm[i]) / (2.0 * step);
    }
  }
  return J;
}

} // namespace csgd
