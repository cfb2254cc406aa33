// csgd: plan, run and verify perturbed compressed SGD from a YAML config.
//
// Exit codes: 0 when the failure list is empty, 1 when some check failed,
// 2 for usage or configuration errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csgd/analysis.hpp"
#include "csgd/config.hpp"
#include "csgd/errors.hpp"
#include "csgd/io.hpp"
#include "csgd/suite.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace csgd;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> seeds_count;
  std::optional<int> threads;
  std::vector<int> only; // suite
};

struct Context {
  RunConfig cfg;
  fs::path out;
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
};

Context load(const Flags& f) {
  Context c;
  c.cfg = load_config(f.config);
  c.out = f.out.value_or(c.cfg.output_dir);
  c.seed = f.seed.value_or(c.cfg.execution.seed);
  c.seeds = f.seeds_count.value_or(c.cfg.execution.seeds);
  set_thread_count(f.threads.value_or(static_cast<int>(c.cfg.execution.threads)));
  return c;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int finish(const std::vector<std::string>& failures) {
  if (failures.empty()) {
    return 0;
  }
  std::cerr << json{{"failures", failures}}.dump() << "\n";
  return 1;
}

RunOptions run_options(const Context& c, std::uint64_t seed) {
  RunOptions ro;
  ro.seed = seed;
  ro.reset_error = c.cfg.execution.reset_error;
  ro.value_bits = c.cfg.compressor.value_bits;
  ro.record_stride = c.cfg.execution.record_stride;
  ro.iterations = c.cfg.execution.iterations;
  return ro;
}

bool distributed(const RunConfig& cfg) {
  return cfg.cluster.workers > 1 || cfg.cluster.compress_downlink;
}

int cmd_plan(const Flags& f) {
  const Context c = load(f);
  const Setup s = make_setup(c.cfg, c.seed);
  const HyperParams& hp = s.hp;
  const int vb = c.cfg.compressor.value_bits;
  const std::uint64_t per_round = message_cost_bits(s.compressor, vb);
  const CommEstimate est = comm_estimate(s.compressor, hp.eps, hp.alpha, vb);

  std::printf("compressor  %s (d=%zu, k=%zu, mu=%s, %s)\n", to_string(s.compressor.kind).c_str(),
              s.compressor.d, s.compressor.k, fmt(hp.mu).c_str(),
              hp.linear_compressor ? "linear" : "non-linear");
  std::printf("constants   L=%s rho=%s f_max=%s alpha=%s\n", fmt(hp.L).c_str(), fmt(hp.rho).c_str(),
              fmt(hp.f_max).c_str(), fmt(hp.alpha).c_str());
  std::printf("eta         %s%s\n", fmt(hp.eta).c_str(), hp.eta_clamped ? " (clamped)" : "");
  std::printf("I           %s (%llu iterations)\n", fmt(hp.I).c_str(),
              static_cast<unsigned long long>(hp.escape_iterations()));
  std::printf("R           %s\n", fmt(hp.R).c_str());
  std::printf("F           %s\n", fmt(hp.F).c_str());
  std::printf("r           %s\n", fmt(hp.r).c_str());
  std::printf("T           %llu\n", static_cast<unsigned long long>(hp.T));
  std::printf("bits/round  %llu per worker\n", static_cast<unsigned long long>(per_round));
  std::printf("total bits  %s per worker\n", fmt(static_cast<double>(hp.T) * per_round).c_str());
  std::printf("improvement %s vs uncompressed (order estimate)\n", fmt(est.improvement).c_str());

  json j{{"seed", c.seed},
         {"compressor", to_json(s.compressor)},
         {"planner", to_json(hp)},
         {"bits_per_round", per_round},
         {"predicted_total_bits", static_cast<double>(hp.T) * static_cast<double>(per_round)},
         {"comm_estimate", to_json(est)},
         {"x0", s.x0.values()}};
  write_json(c.out / "plan.json", j);
  return 0;
}

struct SeedRun {
  RunTrace trace;
  std::optional<CommLedger> ledger;
  HyperParams hp;
  CompressorSpec spec;
};

int cmd_run(const Flags& f) {
  const Context c = load(f);
  const auto runs = map_indices<SeedRun>(c.seeds, Exec::Parallel, [&](std::size_t i) {
    const std::uint64_t seed = c.seed + i;
    const Setup s = make_setup(c.cfg, seed);
    SeedRun r{{}, std::nullopt, s.hp, s.compressor};
    if (distributed(c.cfg)) {
      DistributedOptions opt;
      opt.run = run_options(c, seed);
      opt.compress_downlink = c.cfg.cluster.compress_downlink;
      DistributedResult d = distributed_run(s.workers, s.compressor, s.hp, s.x0, opt);
      r.trace = std::move(d.trace);
      r.ledger = std::move(d.ledger);
    } else {
      r.trace = run(SingleOracle(s.workers.front()), s.compressor, s.hp, s.x0, run_options(c, seed));
    }
    return r;
  });

  std::vector<std::string> failures;
  json seeds = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::uint64_t seed = c.seed + i;
    const SeedRun& r = runs[i];
    const std::string tag = "seed" + std::to_string(seed);
    std::ostringstream csv;
    write_trace_csv(csv, r.trace);
    write_file(c.out / ("trace_" + tag + ".csv"), csv.str());
    json summary = run_summary(r.trace, r.hp, r.spec);
    summary["seed"] = seed;
    if (r.ledger) {
      std::ostringstream lcsv;
      r.ledger->write_csv(lcsv);
      write_file(c.out / ("ledger_" + tag + ".csv"), lcsv.str());
      summary["uplink_bits"] = r.ledger->total_uplink();
      summary["downlink_bits"] = r.ledger->total_downlink();
    }
    write_json(c.out / ("summary_" + tag + ".json"), summary);
    if (r.trace.aborted) {
      failures.push_back(tag + ": " + r.trace.abort_reason);
    }
    const double f_final = r.trace.records.empty() ? 0.0 : r.trace.records.back().f;
    seeds.push_back({{"seed", seed},
                     {"iterations", r.trace.iterations},
                     {"f_final", f_final},
                     {"fosp_fraction", r.trace.fosp_fraction()},
                     {"total_bits", r.trace.total_bits},
                     {"aborted", r.trace.aborted}});
    std::printf("seed %llu: %llu iterations, f=%s, fosp fraction %s, %llu bits%s\n",
                static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(r.trace.iterations), fmt(f_final).c_str(),
                fmt(r.trace.fosp_fraction()).c_str(),
                static_cast<unsigned long long>(r.trace.total_bits),
                r.trace.aborted ? " (aborted)" : "");
  }
  write_json(c.out / "run.json", {{"seeds", seeds}, {"failures", failures}});
  return finish(failures);
}

int cmd_escape(const Flags& f) {
  const Context c = load(f);
  struct Escape {
    bool escaped = false;
    std::uint64_t iterations = 0;
    double f0 = 0.0, f_final = 0.0, target = 0.0;
    bool aborted = false;
  };
  const auto res = map_indices<Escape>(c.seeds, Exec::Parallel, [&](std::size_t i) {
    const std::uint64_t seed = c.seed + i;
    const Setup s = make_setup(c.cfg, seed);
    const AveragedOracle oracle(s.workers);
    RunOptions ro = run_options(c, seed);
    ro.iterations = s.hp.escape_iterations();
    ro.record_stride = std::max<std::uint64_t>(1, s.hp.escape_iterations());
    Escape e;
    e.f0 = s.objective.value(s.x0);
    e.target = e.f0 - s.hp.F;
    ro.stop_below = e.target;
    const RunTrace tr = run(oracle, s.compressor, s.hp, s.x0, ro);
    e.escaped = tr.stopped_early;
    e.iterations = tr.iterations;
    e.f_final = tr.records.back().f;
    e.aborted = tr.aborted;
    return e;
  });
  std::ostringstream csv;
  csv << "seed,escaped,iterations,f0,target,f_final\n";
  std::size_t escaped = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const Escape& e = res[i];
    escaped += e.escaped ? 1 : 0;
    csv << c.seed + i << ',' << (e.escaped ? 1 : 0) << ',' << e.iterations << ','
        << format_real(e.f0) << ',' << format_real(e.target) << ',' << format_real(e.f_final)
        << '\n';
  }
  write_file(c.out / "escape.csv", csv.str());
  const double rate = static_cast<double>(escaped) / static_cast<double>(res.size());
  std::vector<std::string> failures;
  if (rate < c.cfg.escape.min_rate) {
    failures.push_back("escape rate " + fmt(rate) + " below " + fmt(c.cfg.escape.min_rate));
  }
  std::printf("escaped %zu/%zu seeds (rate %s, required %s)\n", escaped, res.size(),
              fmt(rate).c_str(), fmt(c.cfg.escape.min_rate).c_str());
  write_json(c.out / "escape.json",
             {{"seeds", res.size()}, {"escaped", escaped}, {"rate", rate},
              {"min_rate", c.cfg.escape.min_rate}, {"failures", failures}});
  return finish(failures);
}

int cmd_coupling(const Flags& f) {
  const Context c = load(f);
  const Setup s = make_setup(c.cfg, c.seed);
  const AveragedOracle oracle(s.workers);
  CouplingOptions co;
  co.seeds = f.seeds_count.value_or(c.cfg.coupling.seeds);
  co.base_seed = c.seed;
  co.horizon = c.cfg.coupling.horizon;
  co.reset_error = c.cfg.execution.reset_error;
  co.sample_times = c.cfg.coupling.sample_times;
  co.exec = Exec::Parallel;
  const CouplingResult res = coupling_experiment(oracle, s.compressor, s.hp, s.x0, co);
  const GrowthFit fit = fit_growth(res, s.hp);

  std::ostringstream csv;
  csv << "t,mean_xhat_norm,mean_yhat_norm,mean_abs_proj,beta\n";
  for (std::size_t t = 0; t < res.mean_xhat_norm.size(); ++t) {
    csv << t << ',' << format_real(res.mean_xhat_norm[t]) << ','
        << format_real(res.mean_yhat_norm[t]) << ',' << format_real(res.mean_abs_proj[t]) << ','
        << format_real(res.beta[t]) << '\n';
  }
  write_file(c.out / "coupling.csv", csv.str());

  std::vector<std::string> failures;
  if (fit.t_end <= fit.t_begin + 1) {
    failures.push_back("growth window is empty; lower c_r or lengthen the horizon");
  } else if (fit.relative_error > c.cfg.coupling.max_fit_error) {
    failures.push_back("growth rate off by " + fmt(fit.relative_error));
  }
  if (res.max_bookkeeping_error > 1e-10) {
    failures.push_back("yhat = xhat - eta ehat violated by " + fmt(res.max_bookkeeping_error));
  }
  json dist = json::array();
  for (std::size_t j = 0; j < res.sample_times.size(); ++j) {
    const MomentComparison m = compare_moments(res.f_first[j], res.f_second[j]);
    const KsResult ks = ks_two_sample(res.f_first[j], res.f_second[j]);
    const auto t = std::to_string(res.sample_times[j]);
    if (!m.passed) {
      failures.push_back("moments differ at t=" + t);
    }
    if (!ks.passed) {
      failures.push_back("KS rejects equal laws at t=" + t);
    }
    dist.push_back({{"t", res.sample_times[j]},
                    {"mean", {m.mean_a, m.mean_b}},
                    {"mean_band", m.mean_band},
                    {"var", {m.var_a, m.var_b}},
                    {"var_band", m.var_band},
                    {"moments_passed", m.passed},
                    {"ks_statistic", ks.statistic},
                    {"ks_critical", ks.critical}});
  }
  std::printf("gamma %s, fitted growth %s vs ln(1+eta gamma) %s over [%llu, %llu), escape rate %s\n",
              fmt(res.gamma).c_str(), fmt(fit.slope).c_str(), fmt(fit.expected).c_str(),
              static_cast<unsigned long long>(fit.t_begin),
              static_cast<unsigned long long>(fit.t_end), fmt(res.escape_rate).c_str());
  write_json(c.out / "coupling.json",
             {{"gamma", res.gamma},
              {"horizon", res.horizon},
              {"seeds", co.seeds},
              {"fit",
               {{"t_begin", fit.t_begin},
                {"t_end", fit.t_end},
                {"slope", fit.slope},
                {"expected", fit.expected},
                {"relative_error", fit.relative_error}}},
              {"bookkeeping_error", res.max_bookkeeping_error},
              {"escape_rate", res.escape_rate},
              {"escape_rate_first", res.escape_rate_first},
              {"escape_rate_second", res.escape_rate_second},
              {"distribution", dist},
              {"planner", to_json(s.hp)},
              {"failures", failures}});
  return finish(failures);
}

int cmd_verify_compressors(const Flags& f) {
  const Context c = load(f);
  const VerifyConfig& v = c.cfg.verify;
  const std::size_t d = v.dim;
  const double band = 3.0 / std::sqrt(static_cast<double>(v.trials));
  std::vector<std::string> failures;
  std::ostringstream csv;
  csv << "kind,k,s,mu,ratio,std_error,bound,passed\n";
  json rows = json::array();
  for (const auto& spec : {CompressorSpec::identity(d), CompressorSpec::random_k(d, v.k),
                           CompressorSpec::top_k(d, v.k), CompressorSpec::sign(d)}) {
    const FactorEstimate est =
        compression_factor_estimate(spec, isotropic_gaussian_sampler(), v.trials, c.seed, Exec::Parallel);
    const double mu = compression_factor(spec);
    const double bound = 1.0 - mu + band;
    const bool ok = est.ratio <= bound;
    if (!ok) {
      failures.push_back(to_string(spec.kind) + " contraction " + fmt(est.ratio) + " exceeds " +
                         fmt(bound));
    }
    csv << to_string(spec.kind) << ',' << spec.k << ',' << spec.s << ',' << format_real(mu) << ','
        << format_real(est.ratio) << ',' << format_real(est.std_error) << ','
        << format_real(bound) << ',' << (ok ? 1 : 0) << '\n';
    rows.push_back({{"kind", to_string(spec.kind)}, {"mu", mu}, {"ratio", est.ratio}, {"bound", bound}, {"passed", ok}});
    std::printf("%-12s mu=%-10s E||x-C(x)||^2/||x||^2=%-10s bound %-10s %s\n",
                to_string(spec.kind).c_str(), fmt(mu).c_str(), fmt(est.ratio).c_str(),
                fmt(bound).c_str(), ok ? "ok" : "FAIL");
  }
  const CompressorSpec q = CompressorSpec::quantization(d, v.s);
  SeededRng xr = SeededRng::for_stream(c.seed, Purpose::Sampler, 1, 0);
  const BiasReport bias = compressor_bias(q, gaussian_vector(xr, d, 1.0), v.trials, c.seed, Exec::Parallel);
  if (!bias.passed()) {
    failures.push_back("quantization biased on " + std::to_string(bias.outside) + " coordinates");
  }
  csv << "quantization,0," << v.s << ',' << format_real(compression_factor(q)) << ",,,,"
      << (bias.passed() ? 1 : 0) << '\n';
  std::printf("%-12s unbiased within 3 se on %zu/%zu coordinates (max |z| %s)\n", "quantization",
              d - bias.outside, d, fmt(bias.max_abs_z).c_str());
  write_file(c.out / "compressors.csv", csv.str());
  write_json(c.out / "compressors.json",
             {{"dim", d}, {"trials", v.trials}, {"contraction", rows},
              {"quantization", {{"s", v.s}, {"max_abs_z", bias.max_abs_z}, {"outside", bias.outside}}},
              {"failures", failures}});
  return finish(failures);
}

int cmd_suite(const Flags& f) {
  set_thread_count(f.threads.value_or(0));
  SuiteOptions opt;
  opt.seed = f.seed.value_or(1);
  std::vector<std::string> failures;
  json results = json::array();
  run_suite(opt, f.only, [&](const CriterionResult& r) {
    std::printf("%s\n", format_result(r).c_str());
    std::fflush(stdout);
    results.push_back(to_json(r));
    if (!r.passed()) {
      failures.push_back("criterion " + std::to_string(r.id) + ": " + r.name);
    }
  });
  if (f.out) {
    write_json(fs::path(*f.out) / "suite.json", {{"criteria", results}, {"failures", failures}});
  }
  return finish(failures);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed compressed SGD with error feedback"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config, "YAML run configuration");
    if (needs_config) {
      opt->required()->check(CLI::ExistingFile);
    }
    sub->add_option("--seed", flags.seed, "first seed (overrides execution.seed)");
    sub->add_option("--out", flags.out, "output directory (overrides output.dir)");
    sub->add_option("--seeds-count", flags.seeds_count, "number of seeds")->check(CLI::PositiveNumber);
    sub->add_option("--threads", flags.threads, "OpenMP threads, 0 for the default")
        ->check(CLI::NonNegativeNumber);
  };

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Flags&);
    bool needs_config;
  };
  const std::vector<Cmd> cmds{
      {"plan", "print the planned hyperparameters and communication estimate", cmd_plan, true},
      {"run", "run the optimizer for each seed and write traces", cmd_run, true},
      {"escape", "measure the saddle-escape rate within one escape window", cmd_escape, true},
      {"coupling", "run coupled trajectories from a saddle", cmd_coupling, true},
      {"verify-compressors", "Monte-Carlo check of the compressor contracts", cmd_verify_compressors, true},
      {"suite", "run the acceptance battery", cmd_suite, false},
  };
  int (*chosen)(const Flags&) = nullptr;
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, c.needs_config);
    if (std::string(c.name) == "suite") {
      sub->add_option("--only", flags.only, "criterion ids to run");
    }
    sub->callback([&chosen, fn = c.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return chosen(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << json{{"failures", {std::string(e.what())}}}.dump() << "\n";
    return 1;
  }
}
