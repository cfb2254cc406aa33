#include "csgd/suite.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "csgd/analysis.hpp"
#include "csgd/cluster.hpp"
#include "csgd/config.hpp"
#include "csgd/errors.hpp"

namespace csgd {

namespace {

using json = nlohmann::json;

struct Outcome {
  bool passed = false;
  std::string detail;
  json metrics = json::object();
};

std::string num(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

HyperParams plan_for(const Objective& obj, const StochasticOracle& oracle,
                     const CompressorSpec& spec, double eps, const ParamVector& x0,
                     const PlanConstants& pc = {}, std::optional<double> rho = std::nullopt) {
  const ObjectiveConstants k = obj.certified_constants(obj.box_radius());
  PlannerInput in;
  in.eps = eps;
  in.L = k.L;
  in.rho = rho.value_or(k.rho);
  in.sigma = oracle.sigma();
  in.ell_tilde = oracle.stochastic_lipschitz(k.L);
  in.lipschitz_sg = oracle.lipschitz_stochastic();
  in.compressor = spec;
  in.f_max = std::max(0.0, obj.value(x0) - k.f_lower);
  in.constants = pc;
  return plan(in);
}

ParamVector uniform_point(std::size_t d, double half, std::uint64_t seed) {
  SeededRng rng = SeededRng::for_stream(seed, Purpose::InitialPoint, 0, 0);
  ParamVector x(d);
  for (auto& v : x) {
    v = half * (2.0 * rng.uniform() - 1.0);
  }
  return x;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(const ParamVector& a, const ParamVector& b) {
  if (a.dim() != b.dim()) {
    return false;
  }
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (!same_bits(a[i], b[i])) {
      return false;
    }
  }
  return true;
}

bool same_trace(const RunTrace& a, const RunTrace& b) {
  if (a.records.size() != b.records.size() || a.iterations != b.iterations ||
      a.total_bits != b.total_bits || a.resets != b.resets || a.aborted != b.aborted) {
    return false;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const IterRecord& p = a.records[i];
    const IterRecord& q = b.records[i];
    if (p.t != q.t || p.bits != q.bits || p.reset != q.reset || !same_bits(p.f, q.f) ||
        !same_bits(p.f_y, q.f_y) || !same_bits(p.grad_norm, q.grad_norm) ||
        !same_bits(p.err_norm, q.err_norm) || !same_bits(p.y_drift, q.y_drift)) {
      return false;
    }
  }
  return same_bits(a.x_final, b.x_final) && same_bits(a.e_final, b.e_final);
}

// 1. Contraction of the sparsifiers and Sign, unbiasedness of Quantization.
Outcome compressor_contracts(const SuiteOptions& o) {
  constexpr std::size_t d = 100;
  constexpr std::size_t trials = 100000;
  const double band = 3.0 / std::sqrt(static_cast<double>(trials));
  Outcome out;
  out.passed = true;
  const std::vector<CompressorSpec> specs{
      CompressorSpec::identity(d),    CompressorSpec::random_k(d, 1),
      CompressorSpec::random_k(d, 10), CompressorSpec::random_k(d, d),
      CompressorSpec::top_k(d, 10),   CompressorSpec::sign(d),
  };
  json rows = json::array();
  double worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& spec : specs) {
    const FactorEstimate est =
        compression_factor_estimate(spec, isotropic_gaussian_sampler(), trials, o.seed, o.exec);
    const double bound = 1.0 - compression_factor(spec) + band;
    const bool ok = est.ratio <= bound;
    out.passed = out.passed && ok;
    worst_margin = std::min(worst_margin, bound - est.ratio);
    rows.push_back({{"kind", to_string(spec.kind)},
                    {"k", spec.k},
                    {"ratio", est.ratio},
                    {"bound", bound},
                    {"passed", ok}});
  }
  out.metrics["contraction"] = rows;

  // A fixed input compressed under independent randomness.
  const CompressorSpec q = CompressorSpec::quantization(d, 1);
  SeededRng xr = SeededRng::for_stream(o.seed, Purpose::Sampler, 1, 0);
  const ParamVector x = gaussian_vector(xr, d, 1.0);
  const BiasReport bias = compressor_bias(q, x, trials, o.seed, o.exec);
  const double max_z = bias.max_abs_z;
  const std::size_t outside = bias.outside;
  const bool unbiased = outside == 0;
  out.passed = out.passed && unbiased;
  out.metrics["quantization"] = {{"max_z", max_z}, {"coordinates_outside", outside}};
  out.detail = "min contraction margin " + num(worst_margin) + ", quantization max |z| " +
               num(max_z) + " (" + std::to_string(outside) + "/100 beyond 3 se)";
  return out;
}

// 2. Linearity of RandomK under fixed randomness; a TopK counterexample.
Outcome linearity(const SuiteOptions& o) {
  constexpr std::size_t d = 100;
  constexpr std::size_t triples = 1000;
  const CompressorSpec rk = CompressorSpec::random_k(d, 10);
  const CompressorSpec tk = CompressorSpec::top_k(d, 10);
  auto defect = [&](const CompressorSpec& spec, std::size_t i, double& a, double& b) {
    SeededRng r = SeededRng::for_stream(o.seed, Purpose::Trial, 2, i);
    a = r.normal();
    b = r.normal();
    const ParamVector x = gaussian_vector(r, d, 1.0);
    const ParamVector y = gaussian_vector(r, d, 1.0);
    const SeededRng theta = SeededRng::for_stream(o.seed, Purpose::CompressorShared, 0, i);
    auto C = [&](const ParamVector& v) {
      SeededRng rng = theta;
      return apply_compressor(spec, v, rng);
    };
    const ParamVector lhs = C(a * x + b * y);
    const ParamVector cx = C(x);
    const ParamVector cy = C(y);
    const ParamVector rhs = a * cx + b * cy;
    const double scale = norm(lhs) + std::abs(a) * norm(cx) + std::abs(b) * norm(cy);
    return scale > 0.0 ? norm(lhs - rhs) / scale : 0.0;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < triples; ++i) {
    double a, b;
    worst = std::max(worst, defect(rk, i, a, b));
  }
  std::optional<std::size_t> witness;
  double wa = 0.0, wb = 0.0, wdefect = 0.0;
  for (std::size_t i = 0; i < triples && !witness; ++i) {
    const double dft = defect(tk, i, wa, wb);
    if (dft > 1e-6) {
      witness = i;
      wdefect = dft;
    }
  }
  Outcome out;
  out.passed = worst <= 1e-12 && witness.has_value();
  out.metrics = {{"random_k_max_relative_defect", worst}, {"top_k_witness_found", witness.has_value()}};
  if (witness) {
    out.metrics["top_k_witness"] = {{"triple", *witness}, {"a", wa}, {"b", wb}, {"relative_defect", wdefect}};
  }
  out.detail = "RandomK max defect " + num(worst) +
               (witness ? ", TopK witness at triple " + std::to_string(*witness) +
                              " with defect " + num(wdefect)
                        : ", no TopK witness");
  return out;
}

// 3. y_{t+1} - y_t = -eta (grad F(x_t) + xi_t) along every run.
Outcome corrected_iterate_identity(const SuiteOptions& o) {
  constexpr std::size_t d = 4;
  constexpr std::uint64_t T = 2000;
  constexpr std::size_t seeds = 10;
  const std::vector<double> cubic_spec{-1.0, 0.5, 1.0, 2.0};
  const std::vector<double> quad_spec{0.2, 0.5, 1.0, 2.0};
  struct Problem {
    Objective obj;
    std::optional<double> rho;
  };
  const std::vector<Problem> problems{
      {Objective::double_well(d).with_box(2.0), std::nullopt},
      {Objective::cubic_reg(Objective::quadratic_spectrum(cubic_spec).matrix(), 1.0).with_box(3.0),
       std::nullopt},
      {Objective::quadratic_spectrum(quad_spec, 7), 1.0},
  };
  const std::vector<CompressorSpec> specs{
      CompressorSpec::identity(d), CompressorSpec::random_k(d, 2), CompressorSpec::top_k(d, 2),
      CompressorSpec::sign(d),     CompressorSpec::quantization(d, 1),
  };
  struct SeedResult {
    double max_rel = 0.0;
    bool aborted = false;
    std::uint64_t resets = 0;
  };
  double worst = 0.0;
  std::size_t aborted = 0, runs = 0;
  std::uint64_t resets = 0;
  for (const auto& p : problems) {
    const SingleOracle oracle(StochasticOracle(p.obj, NoiseKind::AdditiveGaussian, 0.1));
    for (const auto& spec : specs) {
      const HyperParams hp = plan_for(p.obj, oracle.oracle(), spec, 0.1, ParamVector(d), {}, p.rho);
      for (const bool reset : {false, true}) {
        const auto res = map_indices<SeedResult>(seeds, o.exec, [&](std::size_t s) {
          const std::uint64_t seed = o.seed + s;
          SeedResult r;
          OptimizerState st = OptimizerState::start(uniform_point(d, 0.5 * p.obj.box(), seed));
          StepOptions so;
          so.seed = seed;
          try {
            for (std::uint64_t t = 0; t < T; ++t) {
              r.resets += maybe_reset(st, hp, reset) ? 1 : 0;
              const ParamVector y0 = corrected_iterate(st, hp);
              const StepDetail sd = step(st, oracle, spec, hp, so);
              const ParamVector y1 = corrected_iterate(st, hp);
              const ParamVector drive = sd.stochastic_grad + sd.noise;
              ParamVector diff = y1 - y0;
              axpy(hp.eta, drive.span(), diff.span());
              const double scale = norm(y0) + norm(y1) + hp.eta * norm(drive);
              if (scale > 0.0) {
                r.max_rel = std::max(r.max_rel, norm(diff) / scale);
              }
            }
          } catch (const DomainError&) {
            r.aborted = true;
          } catch (const NonFiniteError&) {
            r.aborted = true;
          }
          return r;
        });
        for (const auto& r : res) {
          worst = std::max(worst, r.max_rel);
          aborted += r.aborted ? 1 : 0;
          resets += r.resets;
          ++runs;
        }
      }
    }
  }
  Outcome out;
  out.passed = worst <= 1e-10 && aborted == 0;
  out.metrics = {{"runs", runs}, {"max_relative_error", worst}, {"aborted", aborted}, {"resets", resets}};
  out.detail = std::to_string(runs) + " runs, max relative error " + num(worst) + ", " +
               std::to_string(aborted) + " aborted, " + std::to_string(resets) + " resets";
  return out;
}

// 4. Seed-averaged error accumulator against its bound on a quadratic.
Outcome error_bound(const SuiteOptions& o) {
  constexpr std::size_t d = 50;
  constexpr std::size_t seeds = 100;
  std::vector<double> spectrum(d);
  for (std::size_t i = 0; i < d; ++i) {
    spectrum[i] = 0.1 + 0.9 * static_cast<double>(i) / static_cast<double>(d - 1);
  }
  const Objective obj = Objective::quadratic_spectrum(spectrum, 11);
  const CompressorSpec spec = CompressorSpec::random_k(d, d / 10);
  const SingleOracle oracle(StochasticOracle(obj, NoiseKind::AdditiveGaussian, 0.1));
  const HyperParams hp =
      plan_for(obj, oracle.oracle(), spec, 0.1, uniform_point(d, 1.0, o.seed), {}, 1.0);
  RunOptions ro;
  ro.iterations = 2000;
  const auto traces = map_indices<RunTrace>(seeds, o.exec, [&](std::size_t s) {
    RunOptions r = ro;
    r.seed = o.seed + s;
    return run(oracle, spec, hp, uniform_point(d, 1.0, r.seed), r);
  });
  const double ratio = error_bound_worst_ratio(traces, hp, hp.chi_sq);
  Outcome out;
  out.passed = ratio <= 1.0;
  out.metrics = {{"worst_ratio", ratio}, {"mu", hp.mu}, {"chi_sq", hp.chi_sq}};
  out.detail = "worst ratio of E||e_t||^2 to its bound " + num(ratio);
  return out;
}

// 5. Compressed descent inequality, exact without noise and on average with it.
Outcome descent_lemma(const SuiteOptions& o) {
  constexpr std::size_t d = 20;
  const Objective obj = Objective::double_well(d).with_box(1.5);
  RunOptions ro;
  ro.iterations = 2000;
  ro.record_stride = 1000000;
  Outcome out;
  out.passed = true;

  double worst_exact = std::numeric_limits<double>::infinity();
  std::size_t exact_fail = 0, exact_runs = 0;
  PlanConstants quiet;
  quiet.c_r = 0.0;
  const StochasticOracle clean(obj, NoiseKind::AdditiveGaussian, 0.0);
  for (const auto& spec : {CompressorSpec::random_k(d, 4), CompressorSpec::top_k(d, 4)}) {
    const HyperParams hp = plan_for(obj, clean, spec, 0.1, uniform_point(d, 1.5, o.seed), quiet);
    const auto checks = map_indices<DescentCheck>(20, o.exec, [&](std::size_t s) {
      RunOptions r = ro;
      r.seed = o.seed + s;
      const RunTrace tr = run(SingleOracle(clean), spec, hp, uniform_point(d, 1.5, r.seed), r);
      if (tr.aborted) {
        throw std::runtime_error("descent run aborted: " + tr.abort_reason);
      }
      return descent_lemma_check(tr, hp, 0.0);
    });
    for (const auto& c : checks) {
      const double rel = c.slack() / (std::abs(c.lhs) + std::abs(c.rhs));
      worst_exact = std::min(worst_exact, rel);
      exact_fail += c.slack() < -1e-12 * (std::abs(c.lhs) + std::abs(c.rhs)) ? 1 : 0;
      ++exact_runs;
    }
  }

  const StochasticOracle noisy(obj, NoiseKind::AdditiveGaussian, 0.1);
  const CompressorSpec spec = CompressorSpec::random_k(d, 4);
  const HyperParams hp = plan_for(obj, noisy, spec, 0.1, uniform_point(d, 1.5, o.seed));
  const auto slack = map_indices<double>(200, o.exec, [&](std::size_t s) {
    RunOptions r = ro;
    r.seed = o.seed + s;
    const RunTrace tr = run(SingleOracle(noisy), spec, hp, uniform_point(d, 1.5, r.seed), r);
    if (tr.aborted) {
      throw std::runtime_error("descent run aborted: " + tr.abort_reason);
    }
    return descent_lemma_check(tr, hp, hp.chi_sq).slack();
  });
  const SampleStats st = sample_stats(slack);
  const bool avg_ok = st.mean >= -3.0 * st.std_error;
  out.passed = exact_fail == 0 && avg_ok;
  out.metrics = {{"exact_runs", exact_runs},
                 {"exact_failures", exact_fail},
                 {"min_relative_slack_exact", worst_exact},
                 {"mean_slack_noisy", st.mean},
                 {"slack_std_error_noisy", st.std_error}};
  out.detail = std::to_string(exact_fail) + "/" + std::to_string(exact_runs) +
               " exact runs violate (min relative slack " + num(worst_exact) +
               "), noisy mean slack " + num(st.mean) + " +- " + num(st.std_error);
  return out;
}

// 6. Fraction of visited points that are eps-FOSP.
Outcome fosp_fraction(const SuiteOptions& o) {
  constexpr std::size_t d = 20;
  constexpr std::size_t seeds = 20;
  const Objective obj = Objective::double_well(d).with_box(1.5);
  const CompressorSpec spec = CompressorSpec::random_k(d, 10);
  const StochasticOracle oracle(obj, NoiseKind::AdditiveGaussian, 0.1);
  const auto fractions = map_indices<double>(seeds, o.exec, [&](std::size_t s) {
    const std::uint64_t seed = o.seed + s;
    const ParamVector x0 = uniform_point(d, 1.5, seed);
    const HyperParams hp = plan_for(obj, oracle, spec, 0.05, x0);
    RunOptions r;
    r.seed = seed;
    r.iterations = std::min<std::uint64_t>(hp.T, 100000);
    r.record_stride = 1000000;
    const RunTrace tr = run(SingleOracle(oracle), spec, hp, x0, r);
    return tr.aborted ? 0.0 : tr.fosp_fraction();
  });
  const auto good = std::count_if(fractions.begin(), fractions.end(), [](double f) { return f >= 0.5; });
  Outcome out;
  out.passed = good >= 18;
  out.metrics = {{"fractions", fractions}, {"seeds_at_least_half", good}};
  out.detail = std::to_string(good) + "/20 seeds with >= 50% eps-FOSP, median fraction " +
               num(median(fractions));
  return out;
}

// 7. Escape from the strict saddle at the origin, and the exact fixed point without noise.
Outcome sosp_escape(const SuiteOptions& o) {
  constexpr std::size_t d = 10;
  constexpr std::size_t seeds = 50;
  const Objective obj = Objective::double_well(d).with_box(1.2);
  const ParamVector x0(d);
  const StochasticOracle oracle(obj, NoiseKind::AdditiveGaussian, 0.0);
  const std::vector<std::pair<CompressorSpec, bool>> cases{
      {CompressorSpec::identity(d), false},
      {CompressorSpec::random_k(d, 2), false},
      {CompressorSpec::top_k(d, 2), true},
  };
  Outcome out;
  out.passed = true;
  std::string detail;
  json rows = json::array();
  for (const auto& [spec, reset] : cases) {
    const HyperParams hp = plan_for(obj, oracle, spec, 0.1, x0);
    const auto escaped = map_indices<int>(seeds, o.exec, [&](std::size_t s) {
      RunOptions r;
      r.seed = o.seed + s;
      r.reset_error = reset;
      r.iterations = hp.escape_iterations();
      r.stop_below = obj.value(x0) - hp.F;
      r.record_stride = 1000000;
      return run(SingleOracle(oracle), spec, hp, x0, r).stopped_early ? 1 : 0;
    });
    const double rate = static_cast<double>(std::count(escaped.begin(), escaped.end(), 1)) / seeds;

    PlanConstants quiet;
    quiet.c_r = 0.0;
    const HyperParams hq = plan_for(obj, oracle, spec, 0.1, x0, quiet);
    RunOptions r;
    r.seed = o.seed;
    r.reset_error = reset;
    r.iterations = hq.escape_iterations();
    r.record_stride = 1000000;
    const RunTrace still = run(SingleOracle(oracle), spec, hq, x0, r);
    const bool fixed = !still.aborted && same_bits(still.x_final, x0) && norm(still.e_final) == 0.0;

    const bool ok = rate >= 0.9 && fixed;
    out.passed = out.passed && ok;
    rows.push_back({{"compressor", to_string(spec.kind)},
                    {"k", spec.k},
                    {"reset_error", reset},
                    {"escape_rate", rate},
                    {"budget_iterations", hp.escape_iterations()},
                    {"fixed_point_without_noise", fixed}});
    detail += (detail.empty() ? "" : ", ") + to_string(spec.kind) + " " + num(rate) +
              (fixed ? "" : " (moved without noise)");
  }
  out.metrics["cases"] = rows;
  out.detail = "escape rates " + detail;
  return out;
}

// 8. Fraction of checkpoints certified eps-SOSP.
Outcome sosp_fraction_check(const SuiteOptions& o) {
  constexpr std::size_t d = 10;
  constexpr std::size_t seeds = 20;
  const Objective obj = Objective::double_well(d).with_box(1.2);
  const ParamVector x0(d);
  const StochasticOracle oracle(obj, NoiseKind::AdditiveGaussian, 0.0);
  // Reset-trigger checkpoints need a window short enough that time-triggered
  // resets dominate and a radius wide enough that noise at a minimum does not
  // trigger one.
  PlanConstants topk;
  topk.c_I = 4.0;
  topk.c_R = 2.0;
  struct Case {
    CompressorSpec spec;
    bool reset;
    PlanConstants pc;
  };
  const std::vector<Case> cases{
      {CompressorSpec::random_k(d, 2), false, {}},
      {CompressorSpec::top_k(d, 5), true, topk},
  };
  Outcome out;
  out.passed = true;
  json rows = json::array();
  for (const auto& c : cases) {
    const HyperParams hp = plan_for(obj, oracle, c.spec, 0.1, x0, c.pc);
    const auto fractions = map_indices<double>(seeds, o.exec, [&](std::size_t s) {
      RunOptions r;
      r.seed = o.seed + s;
      r.reset_error = c.reset;
      r.record_stride = 1000000;
      const RunTrace tr = run(SingleOracle(oracle), c.spec, hp, x0, r);
      return sosp_fraction(tr.checkpoints, obj, hp.eps, hp.rho, hp.L);
    });
    const double med = median(fractions);
    out.passed = out.passed && med >= 0.5;
    rows.push_back({{"compressor", to_string(c.spec.kind)},
                    {"k", c.spec.k},
                    {"reset_error", c.reset},
                    {"c_I", hp.c_I},
                    {"c_R", hp.c_R},
                    {"median_fraction", med},
                    {"fractions", fractions}});
    out.detail += (out.detail.empty() ? "median SOSP fraction " : ", ") + to_string(c.spec.kind) +
                  " " + num(med);
  }
  out.metrics["cases"] = rows;
  return out;
}

// 9. Growth of the coupling difference along v1 and equal laws of the pair.
Outcome coupling_growth(const SuiteOptions& o) {
  constexpr std::size_t d = 10;
  std::vector<double> spectrum(d, 1.0);
  spectrum[0] = -0.5;
  const Objective obj = Objective::quadratic_spectrum(spectrum).with_box(1.0);
  const ParamVector x0(d);

  const StochasticOracle clean(obj, NoiseKind::AdditiveGaussian, 0.0);
  const CompressorSpec id = CompressorSpec::identity(d);
  // A small perturbation keeps ||yhat|| below R for many windows of 1/(eta gamma).
  PlanConstants small;
  small.c_r = 0.001;
  const HyperParams hp = plan_for(obj, clean, id, 0.1, x0, small, 1.0);
  CouplingOptions co;
  co.seeds = 200;
  co.base_seed = o.seed;
  co.horizon = 4000;
  co.exec = o.exec;
  const CouplingResult growth = coupling_experiment(SingleOracle(clean), id, hp, x0, co);
  const GrowthFit fit = fit_growth(growth, hp);

  const StochasticOracle noisy(obj, NoiseKind::AdditiveGaussian, 0.1);
  const CompressorSpec rk = CompressorSpec::random_k(d, 5);
  const HyperParams hq = plan_for(obj, noisy, rk, 0.1, x0, {}, 1.0);
  CouplingOptions cd;
  cd.seeds = 500;
  cd.base_seed = o.seed;
  cd.horizon = 4000;
  cd.exec = o.exec;
  for (std::uint64_t t = 400; t <= 4000; t += 400) {
    cd.sample_times.push_back(t);
  }
  const CouplingResult dist = coupling_experiment(SingleOracle(noisy), rk, hq, x0, cd);
  std::size_t moment_fail = 0, ks_fail = 0;
  double worst_ks = 0.0;
  json rows = json::array();
  for (std::size_t j = 0; j < dist.sample_times.size(); ++j) {
    const MomentComparison m = compare_moments(dist.f_first[j], dist.f_second[j]);
    const KsResult ks = ks_two_sample(dist.f_first[j], dist.f_second[j]);
    moment_fail += m.passed ? 0 : 1;
    ks_fail += ks.passed ? 0 : 1;
    worst_ks = std::max(worst_ks, ks.statistic / ks.critical);
    rows.push_back({{"t", dist.sample_times[j]},
                    {"moments_passed", m.passed},
                    {"ks_statistic", ks.statistic},
                    {"ks_critical", ks.critical}});
  }
  Outcome out;
  out.passed = fit.relative_error <= 0.1 && fit.t_end > fit.t_begin + 1 &&
               growth.max_bookkeeping_error <= 1e-10 && moment_fail == 0 && ks_fail == 0;
  out.metrics = {{"fit_window", {fit.t_begin, fit.t_end}},
                 {"slope", fit.slope},
                 {"expected", fit.expected},
                 {"relative_error", fit.relative_error},
                 {"bookkeeping_error", growth.max_bookkeeping_error},
                 {"distribution", rows}};
  out.detail = "slope " + num(fit.slope) + " vs ln(1+eta gamma) " + num(fit.expected) +
               " (rel " + num(fit.relative_error) + ") over [" + std::to_string(fit.t_begin) +
               ", " + std::to_string(fit.t_end) + "), moment failures " +
               std::to_string(moment_fail) + ", KS failures " + std::to_string(ks_fail) +
               " (max D/crit " + num(worst_ks) + ")";
  return out;
}

// 10. Both bounds on beta_t.
Outcome beta_bounds(const SuiteOptions&) {
  Outcome out;
  out.passed = true;
  json rows = json::array();
  double worst_rec = 0.0;
  for (const double eg : {0.01, 0.1, 0.5, 1.0}) {
    const BetaBoundsReport r = check_beta_bounds(eg, 10000);
    const bool ok = r.passed() && r.max_recurrence_error <= 1e-12;
    out.passed = out.passed && ok;
    worst_rec = std::max(worst_rec, r.max_recurrence_error);
    rows.push_back({{"eta_gamma", eg},
                    {"upper_violations", r.upper_violations},
                    {"lower_violations", r.lower_violations},
                    {"min_upper_slack", r.min_upper_slack},
                    {"min_lower_slack", r.min_lower_slack},
                    {"max_recurrence_error", r.max_recurrence_error}});
  }
  out.metrics["cases"] = rows;
  out.detail = std::string(out.passed ? "no" : "some") +
               " violations for t <= 1e4, max recurrence error " + num(worst_rec);
  return out;
}

// 11. Communication arithmetic against the closed forms.
Outcome comm_arithmetic(const SuiteOptions&) {
  constexpr int vb = 32;
  std::size_t cells = 0, mismatches = 0;
  double worst_ratio_dev = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  for (const std::size_t d : {10, 100, 1000, 10000}) {
    for (const double eps : {0.01, 0.05, 0.1, 0.5, 1.0}) {
      for (const double alpha : {1.0, static_cast<double>(d)}) {
        ++cells;
        const double dd = static_cast<double>(d);
        const double k_exact = dd * std::pow(eps, 0.75) / std::sqrt(alpha);
        const auto k = static_cast<std::size_t>(
            std::clamp(std::ceil(k_exact), 1.0, dd));
        bool ok = balanced_random_k(d, eps, alpha) == k;
        CompressorConfig cc;
        cc.kind = CompressorKind::RandomK;
        ok = ok && build_compressor(cc, d, eps, alpha).k == k;

        const double mu = static_cast<double>(k) / dd;
        const double iters = std::max({alpha / std::pow(eps, 4.0),
                                       std::sqrt(1.0 - mu) / (mu * std::pow(eps, 3.0)),
                                       (1.0 - mu) / (mu * mu * std::pow(eps, 2.5))});
        const double base = alpha / std::pow(eps, 4.0);
        const CommEstimate est = comm_estimate(CompressorSpec::random_k(d, k), eps, alpha, vb);
        ok = ok && rel(est.iterations, iters) <= 1e-12 && rel(est.baseline_iterations, base) <= 1e-12;
        ok = ok && est.bits_per_round == k * vb && est.baseline_bits_per_round == d * vb;
        const double total = iters * static_cast<double>(k * vb);
        const double base_total = base * static_cast<double>(d * vb);
        ok = ok && rel(est.total_bits, total) <= 1e-12 &&
             rel(est.baseline_total_bits, base_total) <= 1e-12 &&
             rel(est.improvement, base_total / total) <= 1e-12;
        if (alpha == dd) {
          const double predicted =
              std::sqrt(dd) * std::pow(eps, -0.75) * (k_exact / static_cast<double>(k));
          const double dev = rel(est.improvement, predicted);
          worst_ratio_dev = std::max(worst_ratio_dev, dev);
          ok = ok && dev <= 1e-9;
        }
        ok = ok && comm_estimate(CompressorSpec::identity(d), eps, alpha, vb).improvement == 1.0;
        mismatches += ok ? 0 : 1;
      }
    }
  }
  const bool example = balanced_random_k(100, 0.01, 1.0) == 4;
  Outcome out;
  out.passed = mismatches == 0 && example;
  out.metrics = {{"cells", cells},
                 {"mismatches", mismatches},
                 {"max_ratio_deviation", worst_ratio_dev},
                 {"k_eps_0.01_d_100", balanced_random_k(100, 0.01, 1.0)}};
  out.detail = std::to_string(mismatches) + "/" + std::to_string(cells) +
               " grid cells mismatch, max deviation from sqrt(d) eps^-3/4 " + num(worst_ratio_dev);
  return out;
}

// 12. Distributed run against the single process on the averaged oracle.
Outcome distributed_equivalence(const SuiteOptions& o) {
  constexpr std::size_t d = 20;
  constexpr std::size_t W = 4;
  constexpr std::uint64_t T = 2000;
  const Objective obj = Objective::double_well(d).with_box(1.5);
  const CompressorSpec spec = CompressorSpec::random_k(d, 4);

  std::vector<ParamVector> tilts;
  ParamVector mean(d);
  for (std::size_t i = 0; i < W; ++i) {
    SeededRng rng = SeededRng::for_stream(o.seed, Purpose::Auxiliary, i + 1, 0);
    tilts.push_back(gaussian_vector(rng, d, 0.1));
    mean += tilts.back();
  }
  mean *= 1.0 / static_cast<double>(W);
  std::vector<StochasticOracle> workers;
  for (auto& t : tilts) {
    t -= mean;
    workers.emplace_back(obj.with_tilt(t), NoiseKind::AdditiveGaussian, 0.1);
  }
  const AveragedOracle averaged(workers);
  const ParamVector x0 = uniform_point(d, 1.0, o.seed);
  const HyperParams hp = plan_for(averaged.objective(), workers.front(), spec, 0.1, x0);

  DistributedOptions dopt;
  dopt.run.seed = o.seed;
  dopt.run.iterations = T;
  dopt.run.keep_iterates = true;
  dopt.exec = o.exec;
  const DistributedResult dist = distributed_run(workers, spec, hp, x0, dopt);
  const RunTrace single = run(averaged, spec, hp, x0, dopt.run);

  double worst = 0.0;
  bool shapes = dist.trace.iterates.size() == single.iterates.size() && !dist.trace.aborted &&
                !single.aborted && dist.trace.iterations == T;
  for (std::size_t i = 0; shapes && i < single.iterates.size(); ++i) {
    const double scale = std::max(norm(single.iterates[i]), 1e-300);
    worst = std::max(worst, norm(dist.trace.iterates[i] - single.iterates[i]) / scale);
  }
  const double e_dev = norm(dist.trace.e_final - single.e_final) /
                       std::max(norm(single.e_final), 1e-300);

  const CommLedger& ledger = dist.ledger;
  std::uint64_t up = 0, down = 0;
  for (const auto& e : ledger.entries()) {
    up += e.uplink_bits;
    down += e.downlink_bits;
  }
  const bool ledger_ok = ledger.entries().size() == W * T && up == ledger.total_uplink() &&
                         down == ledger.total_downlink() &&
                         ledger.total_uplink() == W * T * spec.k * 64 &&
                         dist.trace.total_bits == ledger.total_uplink();

  DistributedOptions serial = dopt;
  serial.exec = Exec::Serial;
  DistributedOptions parallel = dopt;
  parallel.exec = Exec::Parallel;
  const bool scheduling = same_trace(distributed_run(workers, spec, hp, x0, serial).trace,
                                     distributed_run(workers, spec, hp, x0, parallel).trace);

  const StochasticOracle lone(obj, NoiseKind::AdditiveGaussian, 0.1);
  const HyperParams h1 = plan_for(obj, lone, spec, 0.1, x0);
  bool reduction = true;
  for (const bool reset : {false, true}) {
    DistributedOptions one;
    one.run.seed = o.seed;
    one.run.iterations = T;
    one.run.reset_error = reset;
    one.exec = o.exec;
    const DistributedResult a = distributed_run({lone}, spec, h1, x0, one);
    const RunTrace b = run(SingleOracle(lone), spec, h1, x0, one.run);
    reduction = reduction && same_trace(a.trace, b);
  }

  Outcome out;
  out.passed = shapes && worst <= 1e-10 && e_dev <= 1e-10 && ledger_ok && scheduling && reduction;
  out.metrics = {{"max_relative_iterate_deviation", worst},
                 {"error_deviation", e_dev},
                 {"ledger_exact", ledger_ok},
                 {"total_uplink_bits", ledger.total_uplink()},
                 {"scheduling_independent", scheduling},
                 {"single_worker_bitwise", reduction}};
  out.detail = "max iterate deviation " + num(worst) + ", ledger " +
               (ledger_ok ? "exact" : "MISMATCH") + ", W=1 " +
               (reduction ? "bitwise identical" : "DIFFERS") + ", scheduling " +
               (scheduling ? "independent" : "DEPENDENT");
  return out;
}

using CriterionFn = Outcome (*)(const SuiteOptions&);

struct Entry {
  CriterionInfo info;
  CriterionFn fn;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries{
      {{1, "compressor contracts", 10.0}, compressor_contracts},
      {{2, "linearity", 1.0}, linearity},
      {{3, "corrected-iterate identity", 30.0}, corrected_iterate_identity},
      {{4, "error accumulator bound", 30.0}, error_bound},
      {{5, "descent lemma", 60.0}, descent_lemma},
      {{6, "eps-FOSP fraction", 120.0}, fosp_fraction},
      {{7, "saddle escape", 120.0}, sosp_escape},
      {{8, "eps-SOSP fraction", 300.0}, sosp_fraction_check},
      {{9, "coupling growth", 120.0}, coupling_growth},
      {{10, "beta bounds", 1.0}, beta_bounds},
      {{11, "communication arithmetic", 1.0}, comm_arithmetic},
      {{12, "distributed equivalence", 30.0}, distributed_equivalence},
  };
  return entries;
}

} // namespace

const std::vector<CriterionInfo>& suite_criteria() {
  static const std::vector<CriterionInfo> infos = [] {
    std::vector<CriterionInfo> v;
    for (const auto& e : registry()) {
      v.push_back(e.info);
    }
    return v;
  }();
  return infos;
}

CriterionResult run_criterion(int id, const SuiteOptions& opt) {
  const auto& reg = registry();
  const auto it = std::find_if(reg.begin(), reg.end(), [&](const Entry& e) { return e.info.id == id; });
  if (it == reg.end()) {
    throw ParameterError("unknown acceptance criterion " + std::to_string(id));
  }
  CriterionResult r;
  r.id = id;
  r.name = it->info.name;
  r.budget_seconds = it->info.budget_seconds;
  const auto start = std::chrono::steady_clock::now();
  try {
    Outcome o = it->fn(opt);
    r.property_passed = o.passed;
    r.detail = std::move(o.detail);
    r.metrics = std::move(o.metrics);
  } catch (const std::exception& e) {
    r.property_passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CriterionResult> run_suite(const SuiteOptions& opt, const std::vector<int>& ids,
                                       const std::function<void(const CriterionResult&)>& on_done) {
  std::vector<int> todo = ids;
  if (todo.empty()) {
    for (const auto& c : suite_criteria()) {
      todo.push_back(c.id);
    }
  }
  std::vector<CriterionResult> out;
  for (const int id : todo) {
    out.push_back(run_criterion(id, opt));
    if (on_done) {
      on_done(out.back());
    }
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[160];
  std::snprintf(head, sizeof head, "%s %2d %s (%.2f s / %g s%s): ", r.passed() ? "PASS" : "FAIL",
                r.id, r.name.c_str(), r.seconds, r.budget_seconds,
                r.within_budget() ? "" : ", over budget");
  return head + r.detail;
}

nlohmann::json to_json(const CriterionResult& r) {
  return {{"id", r.id},
          {"name", r.name},
          {"passed", r.passed()},
          {"property_passed", r.property_passed},
          {"seconds", r.seconds},
          {"budget_seconds", r.budget_seconds},
          {"detail", r.detail},
          {"metrics", r.metrics}};
}

} // namespace csgd
