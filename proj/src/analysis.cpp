#include "csgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csgd/errors.hpp"

namespace csgd {

StationarityReport certify(const Objective& obj, const ParamVector& x, double eps, double rho,
                           double L) {
  if (!(eps >= 0.0) || !(L > 0.0) || !(rho >= 0.0)) {
    throw ParameterError("certify: L must be positive, eps and rho non-negative");
  }
  StationarityReport rep;
  rep.point = x;
  rep.eps = eps;
  rep.rho = rho;
  rep.grad_norm = norm(obj.gradient(x));
  const DenseMatrix H = obj.hessian(x);
  const double shift = std::max(L, H.gershgorin_upper());
  rep.lambda_min = min_eigenpair(H, shift, 1e-8 * L).value;
  rep.is_fosp = rep.grad_norm <= eps;
  rep.is_sosp = rep.is_fosp && rep.lambda_min >= -std::sqrt(rho * eps);
  return rep;
}

double sosp_fraction(std::span<const Checkpoint> checkpoints, const Objective& obj, double eps,
                     double rho, double L, Exec exec) {
  if (checkpoints.empty()) {
    throw ParameterError("sosp_fraction: empty checkpoint list");
  }
  const auto flags = map_indices<int>(checkpoints.size(), exec, [&](std::size_t i) {
    return certify(obj, checkpoints[i].x, eps, rho, L).is_sosp ? 1 : 0;
  });
  std::size_t n = 0;
  for (int f : flags) {
    n += static_cast<std::size_t>(f);
  }
  return static_cast<double>(n) / static_cast<double>(checkpoints.size());
}

double fosp_fraction(std::span<const Checkpoint> checkpoints, const Objective& obj, double eps) {
  if (checkpoints.empty()) {
    throw ParameterError("fosp_fraction: empty checkpoint list");
  }
  std::size_t n = 0;
  for (const auto& c : checkpoints) {
    if (norm(obj.gradient(c.x)) <= eps) {
      ++n;
    }
  }
  return static_cast<double>(n) / static_cast<double>(checkpoints.size());
}

double beta(double eta_gamma, std::uint64_t t) {
  const double q2 = (1.0 + eta_gamma) * (1.0 + eta_gamma);
  double sum = 0.0;
  double term = 1.0;
  for (std::uint64_t i = 0; i < t; ++i) {
    sum += term;
    term *= q2;
  }
  return std::sqrt(sum);
}

BetaBoundsReport check_beta_bounds(double eta_gamma, std::uint64_t t_max) {
  if (!(eta_gamma > 0.0) || eta_gamma > 1.0) {
    throw ParameterError("check_beta_bounds: eta*gamma must lie in (0, 1]");
  }
  BetaBoundsReport rep;
  rep.eta_gamma = eta_gamma;
  rep.t_max = t_max;
  const double q2 = (1.0 + eta_gamma) * (1.0 + eta_gamma);
  const double upper = 1.0 / (2.0 * eta_gamma);
  const double lower = 1.0 / (6.0 * eta_gamma);
  const double t_lower = 2.0 / eta_gamma;
  rep.min_upper_slack = std::numeric_limits<double>::infinity();
  rep.min_lower_slack = std::numeric_limits<double>::infinity();

  // s_t = beta_t^2 / q^(2t) satisfies s_0 = 0 and s_{t+1} = (s_t + 1) / q^2.
  double s = 0.0;
  for (std::uint64_t t = 1; t <= t_max; ++t) {
    const double next = (s + 1.0) / q2;
    // Scaled recurrence: s_{t} q^2 - s_{t-1} = 1.
    rep.max_recurrence_error = std::max(rep.max_recurrence_error, std::abs(next * q2 - s - 1.0));
    s = next;
    rep.min_upper_slack = std::min(rep.min_upper_slack, upper - s);
    if (s > upper) {
      ++rep.upper_violations;
    }
    if (static_cast<double>(t) >= t_lower) {
      rep.min_lower_slack = std::min(rep.min_lower_slack, s - lower);
      if (s < lower) {
        ++rep.lower_violations;
      }
    }
  }
  return rep;
}

namespace {

struct SeedCoupling {
  std::vector<double> xhat, yhat, proj;
  double bookkeeping = 0.0;
  bool escaped_a = false;
  bool escaped_b = false;
  std::vector<double> f_a, f_b;
};

} // namespace

CouplingResult coupling_experiment(const GradientOracle& oracle, const CompressorSpec& spec,
                                   const HyperParams& hp, const ParamVector& x0,
                                   const CouplingOptions& opt) {
  if (opt.seeds == 0) {
    throw ParameterError("coupling_experiment: at least one seed required");
  }
  const Objective& obj = oracle.objective();
  const DenseMatrix H0 = obj.hessian(x0);
  const EigenPair eig =
      min_eigenpair(H0, std::max(hp.L, H0.gershgorin_upper()), 1e-12 * std::max(1.0, hp.L));
  if (!(eig.value < -0.5 * std::sqrt(hp.rho * hp.eps))) {
    throw ParameterError("coupling_experiment: x0 is not a strict saddle (lambda_min = " +
                         std::to_string(eig.value) + ")");
  }

  CouplingResult res;
  res.gamma = -eig.value;
  res.v1 = eig.vector;
  res.horizon = opt.horizon ? opt.horizon : hp.escape_iterations();
  res.sample_times = opt.sample_times;
  for (auto t : res.sample_times) {
    if (t > res.horizon) {
      throw ParameterError("coupling_experiment: sample time beyond the horizon");
    }
  }
  const std::size_t n_t = res.horizon + 1;
  res.mean_xhat_norm.assign(n_t, 0.0);
  res.mean_yhat_norm.assign(n_t, 0.0);
  res.mean_abs_proj.assign(n_t, 0.0);
  res.f_first.assign(res.sample_times.size(), {});
  res.f_second.assign(res.sample_times.size(), {});
  res.beta.resize(n_t);
  {
    const double q2 = (1.0 + hp.eta * res.gamma) * (1.0 + hp.eta * res.gamma);
    double sum = 0.0;
    double term = 1.0;
    for (std::size_t t = 0; t < n_t; ++t) {
      res.beta[t] = std::sqrt(sum);
      sum += term;
      term *= q2;
    }
  }

  auto run_seed = [&](std::size_t s) {
    const std::uint64_t seed = opt.base_seed + s;
    SeedCoupling out;
    out.xhat.resize(n_t);
    out.yhat.resize(n_t);
    out.proj.resize(n_t);
    OptimizerState a = OptimizerState::start(x0);
    OptimizerState b = OptimizerState::start(x0);
    StepOptions sa;
    sa.seed = seed;
    StepOptions sb = sa;
    sb.reflect = &res.v1;
    std::size_t next_sample = 0;
    for (std::uint64_t t = 0;; ++t) {
      if (t < res.horizon) {
        maybe_reset(a, hp, opt.reset_error);
        maybe_reset(b, hp, opt.reset_error);
      }
      const ParamVector ya = corrected_iterate(a, hp);
      const ParamVector yb = corrected_iterate(b, hp);
      const ParamVector xhat = b.x - a.x;
      const ParamVector ehat = b.e - a.e;
      const ParamVector yhat = yb - ya;
      ParamVector book = xhat;
      axpy(-hp.eta, ehat.span(), book.span());
      book -= yhat;
      out.bookkeeping = std::max(out.bookkeeping, norm(book) / (1.0 + norm(yhat)));
      out.xhat[t] = norm(xhat);
      out.yhat[t] = norm(yhat);
      out.proj[t] = std::abs(dot(res.v1, yhat));
      out.escaped_a = out.escaped_a || distance(ya.span(), x0.span()) > hp.R;
      out.escaped_b = out.escaped_b || distance(yb.span(), x0.span()) > hp.R;
      while (next_sample < res.sample_times.size() && res.sample_times[next_sample] == t) {
        out.f_a.push_back(obj.value(a.x));
        out.f_b.push_back(obj.value(b.x));
        ++next_sample;
      }
      if (t == res.horizon) {
        break;
      }
      step(a, oracle, spec, hp, sa);
      step(b, oracle, spec, hp, sb);
    }
    return out;
  };

  // Seeds run in blocks; block results are folded in seed order.
  constexpr std::size_t kBlock = 32;
  std::size_t escaped = 0, escaped_a = 0, escaped_b = 0;
  for (std::size_t start = 0; start < opt.seeds; start += kBlock) {
    const std::size_t count = std::min(kBlock, opt.seeds - start);
    const auto block = map_indices<SeedCoupling>(count, opt.exec,
                                                 [&](std::size_t i) { return run_seed(start + i); });
    for (const auto& sc : block) {
      for (std::size_t t = 0; t < n_t; ++t) {
        res.mean_xhat_norm[t] += sc.xhat[t];
        res.mean_yhat_norm[t] += sc.yhat[t];
        res.mean_abs_proj[t] += sc.proj[t];
      }
      res.max_bookkeeping_error = std::max(res.max_bookkeeping_error, sc.bookkeeping);
      escaped_a += sc.escaped_a ? 1 : 0;
      escaped_b += sc.escaped_b ? 1 : 0;
      escaped += (sc.escaped_a || sc.escaped_b) ? 1 : 0;
      for (std::size_t j = 0; j < sc.f_a.size(); ++j) {
        res.f_first[j].push_back(sc.f_a[j]);
        res.f_second[j].push_back(sc.f_b[j]);
      }
    }
  }
  const double n = static_cast<double>(opt.seeds);
  for (std::size_t t = 0; t < n_t; ++t) {
    res.mean_xhat_norm[t] /= n;
    res.mean_yhat_norm[t] /= n;
    res.mean_abs_proj[t] /= n;
  }
  res.escape_rate = static_cast<double>(escaped) / n;
  res.escape_rate_first = static_cast<double>(escaped_a) / n;
  res.escape_rate_second = static_cast<double>(escaped_b) / n;
  return res;
}

GrowthFit fit_growth(const CouplingResult& res, const HyperParams& hp) {
  GrowthFit fit;
  const double eg = hp.eta * res.gamma;
  fit.expected = std::log1p(eg);
  fit.t_begin = static_cast<std::uint64_t>(std::ceil(2.0 / eg));
  fit.t_end = res.mean_abs_proj.size();
  for (std::uint64_t t = fit.t_begin; t < res.mean_yhat_norm.size(); ++t) {
    if (res.mean_yhat_norm[t] >= hp.R) {
      fit.t_end = t;
      break;
    }
  }
  if (fit.t_end < fit.t_begin + 2) {
    fit.relative_error = std::numeric_limits<double>::infinity();
    return fit;
  }
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  double n = 0.0;
  for (std::uint64_t t = fit.t_begin; t < fit.t_end; ++t) {
    if (!(res.mean_abs_proj[t] > 0.0)) {
      continue;
    }
    const double x = static_cast<double>(t);
    const double y = std::log(res.mean_abs_proj[t]);
    st += x;
    sy += y;
    stt += x * x;
    sty += x * y;
    n += 1.0;
  }
  if (n < 2.0) {
    fit.relative_error = std::numeric_limits<double>::infinity();
    return fit;
  }
  fit.slope = (n * sty - st * sy) / (n * stt - st * st);
  fit.relative_error = std::abs(fit.slope - fit.expected) / fit.expected;
  return fit;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw ParameterError("ks_two_sample: empty sample");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) {
      ++i;
    }
    while (j < b.size() && b[j] == v) {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.statistic = d;
  r.critical = 1.628 * std::sqrt((na + nb) / (na * nb));
  r.passed = d <= r.critical;
  return r;
}

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double var_se = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  for (double x : v) {
    m.mean += x;
  }
  m.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double c = (x - m.mean) * (x - m.mean);
    m2 += c;
    m4 += c * c;
  }
  m.var = n > 1.0 ? m2 / (n - 1.0) : 0.0;
  const double pop_var = m2 / n;
  m4 /= n;
  m.var_se = std::sqrt(std::max(0.0, m4 - pop_var * pop_var) / n);
  return m;
}

} // namespace

MomentComparison compare_moments(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ParameterError("compare_moments: need at least two values per sample");
  }
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  MomentComparison c;
  c.mean_a = ma.mean;
  c.mean_b = mb.mean;
  c.var_a = ma.var;
  c.var_b = mb.var;
  c.mean_band = 3.0 * std::sqrt(ma.var / static_cast<double>(a.size()) +
                                mb.var / static_cast<double>(b.size()));
  c.var_band = 3.0 * std::sqrt(ma.var_se * ma.var_se + mb.var_se * mb.var_se);
  c.passed = std::abs(c.mean_a - c.mean_b) <= c.mean_band &&
             std::abs(c.var_a - c.var_b) <= c.var_band;
  return c;
}

SampleStats sample_stats(std::span<const double> v) {
  if (v.empty()) {
    throw ParameterError("sample_stats: empty sample");
  }
  SampleStats s;
  const double n = static_cast<double>(v.size());
  for (double x : v) {
    s.mean += x;
  }
  s.mean /= n;
  if (v.size() > 1) {
    double m2 = 0.0;
    for (double x : v) {
      m2 += (x - s.mean) * (x - s.mean);
    }
    s.std_error = std::sqrt(m2 / (n - 1.0) / n);
  }
  return s;
}

BiasReport compressor_bias(const CompressorSpec& spec, const ParamVector& x, std::size_t trials,
                           std::uint64_t seed, Exec exec) {
  spec.validate();
  if (x.dim() != spec.d || trials < 2) {
    throw ParameterError("compressor_bias: dimension mismatch or fewer than two trials");
  }
  const std::size_t d = x.dim();
  const std::size_t blocks = std::min<std::size_t>(trials, 64);
  struct Sums {
    std::vector<double> s, sq;
  };
  const auto parts = map_indices<Sums>(blocks, exec, [&](std::size_t b) {
    Sums acc{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t t = b * trials / blocks; t < (b + 1) * trials / blocks; ++t) {
      SeededRng rng = SeededRng::for_stream(seed, Purpose::Trial, 1, t);
      const ParamVector c = apply_compressor(spec, x, rng);
      for (std::size_t i = 0; i < d; ++i) {
        const double dev = c[i] - x[i];
        acc.s[i] += dev;
        acc.sq[i] += dev * dev;
      }
    }
    return acc;
  });
  std::vector<double> s(d), sq(d);
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < d; ++i) {
      s[i] += p.s[i];
      sq[i] += p.sq[i];
    }
  }
  const double n = static_cast<double>(trials);
  BiasReport rep;
  rep.z.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double mean = s[i] / n;
    const double var = std::max(0.0, (sq[i] - n * mean * mean) / (n - 1.0));
    const double se = std::sqrt(var / n);
    double z = 0.0;
    if (se > 0.0) {
      z = mean / se;
    } else if (mean != 0.0) {
      z = std::numeric_limits<double>::infinity();
    }
    rep.z[i] = z;
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
    rep.outside += std::abs(z) > 3.0 ? 1 : 0;
  }
  return rep;
}

DescentCheck descent_lemma_check(const RunTrace& trace, const HyperParams& hp, double chi_sq) {
  if (trace.records.empty()) {
    throw ParameterError("descent_lemma_check: empty trace");
  }
  const double T = static_cast<double>(trace.iterations);
  const double mu = hp.mu;
  const double f_y0 = trace.records.front().f_y;
  const double f_yT = trace.records.back().f_y;
  DescentCheck c;
  c.lhs = trace.grad_sq_sum;
  c.rhs = 4.0 * (f_y0 - f_yT) / hp.eta +
          hp.eta * chi_sq * T * (2.0 * hp.L + 8.0 * hp.L * hp.L * hp.eta * (1.0 - mu) / (mu * mu));
  return c;
}

namespace {

void require_full_records(std::span<const RunTrace> traces, std::uint64_t upto) {
  for (const auto& tr : traces) {
    if (tr.records.size() <= upto) {
      throw ParameterError("analysis: trace shorter than the checked window");
    }
    for (std::uint64_t t = 0; t <= upto; ++t) {
      if (tr.records[t].t != t) {
        throw ParameterError("analysis: traces must be recorded with stride 1");
      }
    }
  }
}

} // namespace

WindowReport improve_or_localize_check(std::span<const RunTrace> traces, const HyperParams& hp,
                                       double chi_sq) {
  if (traces.empty()) {
    throw ParameterError("improve_or_localize_check: no traces");
  }
  std::uint64_t T = traces.front().iterations;
  for (const auto& tr : traces) {
    T = std::min(T, tr.iterations);
  }
  const auto t_max = std::min<std::uint64_t>(T, static_cast<std::uint64_t>(std::floor(hp.I)));
  require_full_records(traces, t_max);

  const double mu = hp.mu;
  const double drift_coef = hp.L + 2.0 * (1.0 - mu) * hp.L * hp.L * hp.eta / (mu * mu);
  WindowReport rep;
  rep.passed = true;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  std::vector<double> slack(traces.size());
  for (std::uint64_t t = 1; t <= t_max; ++t) {
    const double tt = static_cast<double>(t);
    const double correction = hp.eta * hp.eta * chi_sq * tt * drift_coef + hp.eta * chi_sq;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const IterRecord& r0 = traces[i].records[0];
      const IterRecord& rt = traces[i].records[t];
      slack[i] = r0.f_y - rt.f_y - rt.y_drift * rt.y_drift / (8.0 * hp.eta * tt) + correction;
    }
    const SampleStats s = sample_stats(slack);
    const double band = 3.0 * s.std_error;
    if (s.mean < -band) {
      rep.passed = false;
    }
    if (s.mean < rep.worst_slack) {
      rep.worst_slack = s.mean;
      rep.worst_band = band;
      rep.worst_t = t;
    }
  }
  if (t_max == 0) {
    rep.worst_slack = 0.0;
  }
  return rep;
}

double error_bound_worst_ratio(std::span<const RunTrace> traces, const HyperParams& hp,
                               double chi_sq) {
  if (traces.empty()) {
    throw ParameterError("error_bound_worst_ratio: no traces");
  }
  std::uint64_t T = traces.front().iterations;
  for (const auto& tr : traces) {
    T = std::min(T, tr.iterations);
  }
  require_full_records(traces, T);
  const double mu = hp.mu;
  const double coef = 4.0 * (1.0 - mu) / (mu * mu);
  const double n = static_cast<double>(traces.size());
  double max_grad_sq = 0.0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t <= T; ++t) {
    double err_sq = 0.0, grad_sq = 0.0;
    for (const auto& tr : traces) {
      err_sq += tr.records[t].err_norm * tr.records[t].err_norm;
      grad_sq += tr.records[t].grad_norm * tr.records[t].grad_norm;
    }
    err_sq /= n;
    grad_sq /= n;
    const double rhs = coef * (max_grad_sq + chi_sq);
    if (rhs > 0.0) {
      worst = std::max(worst, err_sq / rhs);
    } else if (err_sq > 0.0) {
      worst = std::numeric_limits<double>::infinity();
    }
    max_grad_sq = std::max(max_grad_sq, grad_sq);
  }
  return worst;
}

} // namespace csgd
