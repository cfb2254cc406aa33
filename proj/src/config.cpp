#include "csgd/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "csgd/errors.hpp"

namespace csgd {

namespace {

int line_of(const YAML::Node& node) {
  if (!node.IsDefined() || node.Mark().is_null()) {
    return 0;
  }
  return node.Mark().line + 1;
}

/// A mapping whose keys are consumed one by one; finish() rejects the rest.
class Section {
public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (present() && !node_.IsMap()) {
      throw ConfigError(path_ + " must be a mapping", line_of(node_));
    }
  }

  YAML::Node take(const std::string& key) {
    seen_.insert(key);
    return at(key);
  }

  bool present() const { return node_ && !node_.IsNull(); }

  YAML::Node at(const std::string& key) const {
    if (!present()) {
      return YAML::Node();
    }
    const YAML::Node& n = node_;
    return n[key];
  }

  template <class T>
  std::optional<T> opt(const std::string& key) {
    const YAML::Node n = take(key);
    if (!n || n.IsNull()) {
      return std::nullopt;
    }
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type", line_of(n));
    }
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    return opt<T>(key).value_or(fallback);
  }

  std::optional<double> real(const std::string& key, double lo, bool lo_open) {
    const auto v = opt<double>(key);
    if (v && (!std::isfinite(*v) || *v < lo || (lo_open && *v == lo))) {
      throw ConfigError(path_ + "." + key + (lo_open ? " must be > " : " must be >= ") +
                            std::to_string(lo),
                        line_of(at(key)));
    }
    return v;
  }

  std::optional<std::uint64_t> count(const std::string& key, std::uint64_t lo) {
    const auto v = opt<long long>(key);
    if (!v) {
      return std::nullopt;
    }
    if (*v < 0 || static_cast<std::uint64_t>(*v) < lo) {
      throw ConfigError(path_ + "." + key + " must be an integer >= " + std::to_string(lo),
                        line_of(at(key)));
    }
    return static_cast<std::uint64_t>(*v);
  }

  std::vector<double> reals(const std::string& key) {
    return get<std::vector<double>>(key, {});
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path_ + "." + key + " " + what, line_of(at(key)));
  }

  void finish() const {
    if (!present()) {
      return;
    }
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) {
        throw ConfigError("unknown key '" + key + "' in " + path_, line_of(kv.first));
      }
    }
  }

private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
auto parse_enum(Section& s, const std::string& key, Fn fn, decltype(fn(std::string())) fallback) {
  const auto name = s.opt<std::string>(key);
  if (!name) {
    return fallback;
  }
  try {
    return fn(*name);
  } catch (const ParameterError& e) {
    s.fail(key, std::string("is invalid: ") + e.what());
  }
}

void parse_objective(Section s, ObjectiveConfig& c) {
  c.kind = parse_enum(s, "kind", objective_kind_from_string, c.kind);
  c.dim = s.count("dim", 1).value_or(0);
  c.box = s.real("box", 0.0, true);
  c.spectrum = s.reals("spectrum");
  c.rotation_seed = s.count("rotation_seed", 0);
  c.cubic_rho = s.real("cubic_rho", 0.0, true).value_or(c.cubic_rho);
  c.tilt = s.reals("tilt");
  s.finish();

  if (c.kind == ObjectiveKind::DoubleWell) {
    if (c.dim == 0) {
      s.fail("dim", "is required for double_well");
    }
    if (!c.spectrum.empty()) {
      s.fail("spectrum", "does not apply to double_well");
    }
  } else {
    if (c.spectrum.empty()) {
      s.fail("spectrum", "is required for quadratic and cubic_reg");
    }
    if (c.dim == 0) {
      c.dim = c.spectrum.size();
    }
    if (c.spectrum.size() != c.dim) {
      s.fail("spectrum", "must have dim entries");
    }
  }
  if (!c.tilt.empty() && c.tilt.size() != c.dim) {
    s.fail("tilt", "must have dim entries");
  }
}

void parse_constants(Section s, PlanConstants& c) {
  c.c_eta = s.real("c_eta", 0.0, true);
  c.c_I = s.real("c_I", 0.0, true);
  c.c_R = s.real("c_R", 0.0, true);
  c.c_F = s.real("c_F", 0.0, true);
  c.c_r = s.real("c_r", 0.0, false);
  c.c_T = s.real("c_T", 0.0, true).value_or(c.c_T);
  c.eta = s.real("eta", 0.0, true);
  c.T = s.count("T", 0);
  s.finish();
}

void parse_planner(Section s, PlannerConfig& c) {
  c.eps = s.real("eps", 0.0, true).value_or(c.eps);
  if (c.eps > 1.0) {
    s.fail("eps", "must not exceed 1");
  }
  c.L = s.real("L", 0.0, true);
  c.rho = s.real("rho", 0.0, true);
  c.f_lower = s.opt<double>("f_lower");
  parse_constants(Section(s.take("constants"), "planner.constants"), c.constants);
  s.finish();
}

void parse_start(Section s, StartConfig& c, std::size_t d) {
  const auto mode = s.opt<std::string>("mode");
  if (mode) {
    if (*mode == "origin") {
      c.mode = StartMode::Origin;
    } else if (*mode == "uniform") {
      c.mode = StartMode::Uniform;
    } else if (*mode == "point") {
      c.mode = StartMode::Point;
    } else {
      s.fail("mode", "must be origin, uniform or point");
    }
  }
  c.scale = s.real("scale", 0.0, false).value_or(c.scale);
  if (c.scale > 1.0) {
    s.fail("scale", "must not exceed 1");
  }
  c.point = s.reals("point");
  s.finish();
  if (c.mode == StartMode::Point && c.point.size() != d) {
    s.fail("point", "must have dim entries");
  }
  if (c.mode != StartMode::Point && !c.point.empty()) {
    s.fail("point", "requires mode: point");
  }
}

void parse_execution(Section s, ExecutionConfig& c) {
  c.seed = s.count("seed", 0).value_or(c.seed);
  c.seeds = s.count("seeds", 1).value_or(c.seeds);
  c.iterations = s.count("iterations", 0);
  c.reset_error = s.get<bool>("reset_error", c.reset_error);
  c.record_stride = s.count("record_stride", 1).value_or(c.record_stride);
  c.threads = s.count("threads", 0).value_or(c.threads);
  s.finish();
}

void parse_cluster(Section s, ClusterConfig& c, std::size_t d) {
  c.workers = s.count("workers", 1).value_or(c.workers);
  c.tilts = s.get<std::vector<std::vector<double>>>("tilts", {});
  c.tilt_scale = s.real("tilt_scale", 0.0, false).value_or(c.tilt_scale);
  c.compress_downlink = s.get<bool>("compress_downlink", c.compress_downlink);
  s.finish();
  if (!c.tilts.empty()) {
    if (c.tilts.size() != c.workers) {
      s.fail("tilts", "must list one tilt per worker");
    }
    for (const auto& t : c.tilts) {
      if (t.size() != d) {
        s.fail("tilts", "entries must have dim entries");
      }
    }
    if (c.tilt_scale > 0.0) {
      s.fail("tilt_scale", "conflicts with explicit tilts");
    }
  }
}

} // namespace

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("YAML syntax: " + e.msg, e.mark.line + 1);
  }
  if (!root || root.IsNull()) {
    throw ConfigError("empty configuration", 0);
  }
  Section top(root, "config");
  RunConfig cfg;
  if (!top.take("objective")) {
    throw ConfigError("missing section 'objective'", 0);
  }
  parse_objective(Section(top.take("objective"), "objective"), cfg.objective);
  const std::size_t d = cfg.objective.dim;

  {
    Section s(top.take("oracle"), "oracle");
    cfg.oracle.noise = parse_enum(s, "noise", noise_kind_from_string, cfg.oracle.noise);
    cfg.oracle.sigma = s.real("sigma", 0.0, false).value_or(0.0);
    s.finish();
  }
  {
    Section s(top.take("compressor"), "compressor");
    cfg.compressor.kind = parse_enum(s, "kind", compressor_kind_from_string, cfg.compressor.kind);
    const YAML::Node kn = s.take("k");
    if (kn && !kn.IsNull() && !(kn.IsScalar() && kn.Scalar() == "auto")) {
      try {
        const long long k = kn.as<long long>();
        if (k < 1 || static_cast<std::size_t>(k) > d) {
          s.fail("k", "must lie in [1, dim]");
        }
        cfg.compressor.k = static_cast<std::size_t>(k);
      } catch (const YAML::Exception&) {
        s.fail("k", "must be an integer or 'auto'");
      }
    }
    cfg.compressor.s = static_cast<std::uint32_t>(s.count("s", 1).value_or(1));
    const auto vb = s.count("value_bits", 1).value_or(64);
    if (vb > 64) {
      s.fail("value_bits", "must lie in [1, 64]");
    }
    cfg.compressor.value_bits = static_cast<int>(vb);
    s.finish();
  }
  parse_planner(Section(top.take("planner"), "planner"), cfg.planner);
  parse_start(Section(top.take("start"), "start"), cfg.start, d);
  parse_execution(Section(top.take("execution"), "execution"), cfg.execution);
  parse_cluster(Section(top.take("cluster"), "cluster"), cfg.cluster, d);
  {
    Section s(top.take("escape"), "escape");
    cfg.escape.min_rate = s.real("min_rate", 0.0, false).value_or(cfg.escape.min_rate);
    s.finish();
  }
  {
    Section s(top.take("coupling"), "coupling");
    cfg.coupling.seeds = s.count("seeds", 1).value_or(cfg.coupling.seeds);
    cfg.coupling.horizon = s.count("horizon", 0).value_or(0);
    cfg.coupling.sample_times = s.get<std::vector<std::uint64_t>>("sample_times", {});
    cfg.coupling.max_fit_error =
        s.real("max_fit_error", 0.0, true).value_or(cfg.coupling.max_fit_error);
    s.finish();
  }
  {
    Section s(top.take("verify"), "verify");
    cfg.verify.dim = s.count("dim", 1).value_or(cfg.verify.dim);
    cfg.verify.trials = s.count("trials", 2).value_or(cfg.verify.trials);
    cfg.verify.k = s.count("k", 1).value_or(cfg.verify.k);
    cfg.verify.s = static_cast<std::uint32_t>(s.count("s", 1).value_or(cfg.verify.s));
    s.finish();
    if (cfg.verify.k > cfg.verify.dim) {
      s.fail("k", "must not exceed verify.dim");
    }
  }
  {
    Section s(top.take("output"), "output");
    cfg.output_dir = s.get<std::string>("dir", cfg.output_dir);
    s.finish();
  }
  top.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path, 0);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

Objective build_objective(const ObjectiveConfig& cfg) {
  Objective obj = [&] {
    switch (cfg.kind) {
    case ObjectiveKind::Quadratic:
      return Objective::quadratic_spectrum(cfg.spectrum, cfg.rotation_seed);
    case ObjectiveKind::CubicReg:
      return Objective::cubic_reg(
          Objective::quadratic_spectrum(cfg.spectrum, cfg.rotation_seed).matrix(), cfg.cubic_rho);
    case ObjectiveKind::DoubleWell:
      break;
    }
    return Objective::double_well(cfg.dim);
  }();
  if (cfg.box) {
    obj = obj.with_box(*cfg.box);
  }
  if (!cfg.tilt.empty()) {
    obj = obj.with_tilt(ParamVector(std::span<const double>(cfg.tilt)));
  }
  return obj;
}

ParamVector initial_point(const RunConfig& cfg, const Objective& obj, std::uint64_t seed) {
  const std::size_t d = obj.dim();
  switch (cfg.start.mode) {
  case StartMode::Origin:
    return ParamVector(d);
  case StartMode::Point:
    return ParamVector(std::span<const double>(cfg.start.point));
  case StartMode::Uniform:
    break;
  }
  SeededRng rng = SeededRng::for_stream(seed, Purpose::InitialPoint, 0, 0);
  const double half = cfg.start.scale * obj.box();
  ParamVector x(d);
  for (auto& v : x) {
    v = half * (2.0 * rng.uniform() - 1.0);
  }
  return x;
}

CompressorSpec build_compressor(const CompressorConfig& cfg, std::size_t d, double eps,
                                double alpha) {
  CompressorSpec spec;
  spec.kind = cfg.kind;
  spec.d = d;
  spec.s = cfg.s;
  switch (cfg.kind) {
  case CompressorKind::Identity:
    spec.k = d;
    break;
  case CompressorKind::RandomK:
  case CompressorKind::TopK:
    spec.k = cfg.k.value_or(balanced_random_k(d, eps, alpha));
    break;
  case CompressorKind::Sign:
  case CompressorKind::Quantization:
    spec.k = 0;
    break;
  }
  spec.validate();
  return spec;
}

namespace {

std::vector<ParamVector> worker_tilts(const RunConfig& cfg, std::size_t d) {
  const std::size_t W = cfg.cluster.workers;
  std::vector<ParamVector> tilts;
  if (!cfg.cluster.tilts.empty()) {
    for (const auto& t : cfg.cluster.tilts) {
      tilts.emplace_back(std::span<const double>(t));
    }
    return tilts;
  }
  if (cfg.cluster.tilt_scale == 0.0 || W == 1) {
    return tilts;
  }
  // Zero-mean heterogeneity, fixed by the config seed rather than the run seed.
  ParamVector mean(d);
  for (std::size_t i = 0; i < W; ++i) {
    SeededRng rng = SeededRng::for_stream(cfg.execution.seed, Purpose::Auxiliary, i + 1, 0);
    tilts.push_back(gaussian_vector(rng, d, cfg.cluster.tilt_scale));
    mean += tilts.back();
  }
  mean *= 1.0 / static_cast<double>(W);
  for (auto& t : tilts) {
    t -= mean;
  }
  return tilts;
}

} // namespace

Setup make_setup(const RunConfig& cfg, std::uint64_t seed) {
  const Objective base = build_objective(cfg.objective);
  const std::size_t d = base.dim();
  const auto tilts = worker_tilts(cfg, d);

  std::vector<StochasticOracle> workers;
  for (std::size_t i = 0; i < cfg.cluster.workers; ++i) {
    Objective obj = base;
    if (!tilts.empty()) {
      ParamVector b = tilts[i];
      if (base.tilt().dim() != 0) {
        b += base.tilt();
      }
      obj = base.with_tilt(std::move(b));
    }
    workers.emplace_back(std::move(obj), cfg.oracle.noise, cfg.oracle.sigma);
  }
  const AveragedOracle averaged(workers);
  const Objective& mean = averaged.objective();

  ParamVector x0 = initial_point(cfg, mean, seed);
  if (x0.dim() != d) {
    throw ConfigError("start.point must have dim entries", 0);
  }
  mean.check_domain(x0.span());

  ObjectiveConstants k = mean.certified_constants(mean.box_radius());
  if (cfg.planner.L) {
    k.L = *cfg.planner.L;
  }
  if (cfg.planner.rho) {
    k.rho = *cfg.planner.rho;
  }
  if (cfg.planner.f_lower) {
    k.f_lower = *cfg.planner.f_lower;
  }
  if (k.rho <= 0.0) {
    throw ConfigError("planner.rho is required for objectives with a constant Hessian", 0);
  }

  const StochasticOracle& oracle = workers.front();
  const double alpha = oracle.lipschitz_stochastic() ? 1.0 : static_cast<double>(d);
  PlannerInput in;
  in.eps = cfg.planner.eps;
  in.L = k.L;
  in.rho = k.rho;
  in.sigma = cfg.oracle.sigma;
  in.ell_tilde = oracle.stochastic_lipschitz(k.L);
  in.lipschitz_sg = oracle.lipschitz_stochastic();
  in.compressor = build_compressor(cfg.compressor, d, cfg.planner.eps, alpha);
  in.f_max = std::max(0.0, mean.value(x0) - k.f_lower);
  in.constants = cfg.planner.constants;

  Setup s{mean, std::move(workers), in.compressor, std::move(x0), plan(in), k};
  return s;
}

} // namespace csgd
