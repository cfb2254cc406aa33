#include "csgd/optimizer.hpp"

#include <cmath>

#include "csgd/errors.hpp"

namespace csgd {

OptimizerState OptimizerState::start(const ParamVector& x0) {
  if (x0.dim() == 0) {
    throw ParameterError("optimizer: empty starting point");
  }
  if (!x0.all_finite()) {
    throw NonFiniteError("optimizer: starting point is not finite");
  }
  OptimizerState s;
  s.x = x0;
  s.e = ParamVector(x0.dim());
  s.anchor = x0;
  return s;
}

ParamVector corrected_iterate(const OptimizerState& state, const HyperParams& hp) {
  ParamVector y = state.x;
  axpy(-hp.eta, state.e.span(), y.span());
  return y;
}

bool reset_due(std::uint64_t t, std::uint64_t t_prime, const ParamVector& anchor,
               const ParamVector& y, const HyperParams& hp) {
  return static_cast<double>(t - t_prime) > hp.I || distance(anchor.span(), y.span()) > hp.R;
}

bool maybe_reset(OptimizerState& state, const HyperParams& hp, bool reset_error) {
  if (!reset_error) {
    return false;
  }
  ParamVector y = corrected_iterate(state, hp);
  if (!reset_due(state.t, state.t_prime, state.anchor, y, hp)) {
    return false;
  }
  state.t_prime = state.t;
  state.x = std::move(y);
  state.e.fill(0.0);
  state.anchor = state.x;
  return true;
}

void artificial_noise(std::uint64_t seed, std::uint64_t t, const HyperParams& hp, ParamVector& out) {
  if (hp.r == 0.0) {
    out.fill(0.0);
    return;
  }
  SeededRng rng = SeededRng::for_stream(seed, Purpose::ArtificialNoise, 0, t);
  fill_gaussian(rng, hp.r / std::sqrt(static_cast<double>(out.dim())), out.span());
}

void reflect_along(const ParamVector& v, ParamVector& xi) {
  const double c = 2.0 * dot(v, xi);
  axpy(-c, v.span(), xi.span());
}

StepDetail step(OptimizerState& state, const GradientOracle& oracle, const CompressorSpec& spec,
                const HyperParams& hp, const StepOptions& opt) {
  const std::size_t d = state.x.dim();
  StepDetail out;
  out.stochastic_grad = ParamVector(d);
  out.noise = ParamVector(d);
  oracle.gradient(state.x, opt.seed, state.t, out.stochastic_grad);
  artificial_noise(opt.seed, state.t, hp, out.noise);
  if (opt.reflect != nullptr) {
    reflect_along(*opt.reflect, out.noise);
  }

  ParamVector u = state.e;
  u += out.stochastic_grad;
  u += out.noise;
  SeededRng comp_rng = SeededRng::for_stream(opt.seed, Purpose::CompressorShared, 0, state.t);
  Compressed c = compress(spec, u, comp_rng, opt.value_bits);

  axpy(-hp.eta, c.c.span(), state.x.span());
  state.e = std::move(u);
  state.e -= c.c;
  ++state.t;
  if (!state.x.all_finite() || !state.e.all_finite()) {
    throw NonFiniteError("non-finite iterate or error accumulator after iteration " +
                         std::to_string(state.t - 1));
  }
  out.compressed = std::move(c.c);
  out.cost_bits = c.msg.cost_bits;
  return out;
}

double RunTrace::fosp_fraction() const {
  if (iterations == 0) {
    return 0.0;
  }
  return static_cast<double>(fosp_visited) / static_cast<double>(iterations);
}

RunTrace run(const GradientOracle& oracle, const CompressorSpec& spec, const HyperParams& hp,
             const ParamVector& x0, const RunOptions& opt) {
  spec.validate();
  const Objective& obj = oracle.objective();
  if (x0.dim() != obj.dim() || spec.d != obj.dim()) {
    throw ParameterError("run: starting point, compressor and objective dimensions differ");
  }
  obj.check_domain(x0.span());
  if (opt.record_stride == 0) {
    throw ParameterError("run: record_stride must be positive");
  }

  const std::uint64_t T = opt.iterations.value_or(hp.T);
  const std::uint64_t period = std::max<std::uint64_t>(1, hp.escape_iterations());
  StepOptions sopt;
  sopt.seed = opt.seed;
  sopt.value_bits = opt.value_bits;

  RunTrace trace;
  OptimizerState state = OptimizerState::start(x0);
  trace.checkpoints.push_back({0, x0});
  ParamVector grad(obj.dim());

  for (std::uint64_t t = 0;; ++t) {
    try {
      IterRecord rec;
      rec.t = t;
      if (t < T) {
        rec.reset = maybe_reset(state, hp, opt.reset_error);
      }
      if (rec.reset) {
        ++trace.resets;
        trace.checkpoints.push_back({t, state.x});
      } else if (!opt.reset_error && t > 0 && t % period == 0 && t < T) {
        trace.checkpoints.push_back({t, state.x});
      }

      const ParamVector y = corrected_iterate(state, hp);
      rec.f = obj.value(state.x);
      obj.gradient(state.x.span(), grad.span());
      rec.grad_norm = norm(grad);
      rec.err_norm = norm(state.e);
      rec.y_drift = distance(y.span(), x0.span());
      rec.f_y = obj.in_domain(y.span()) ? obj.value(y) : std::nan("");
      if (!std::isfinite(rec.f) || !std::isfinite(rec.grad_norm)) {
        throw NonFiniteError("non-finite objective or gradient at iteration " + std::to_string(t));
      }

      const bool stop = opt.stop_below && rec.f < *opt.stop_below;
      if (stop || t >= T) {
        trace.stopped_early = stop && t < T;
        trace.records.push_back(rec);
        if (opt.keep_iterates) {
          trace.iterates.push_back(state.x);
        }
        break;
      }

      if (rec.grad_norm <= hp.eps) {
        ++trace.fosp_visited;
      }
      trace.grad_sq_sum += rec.grad_norm * rec.grad_norm;

      const ParamVector x_t = opt.keep_iterates ? state.x : ParamVector();
      const StepDetail detail = step(state, oracle, spec, hp, sopt);
      rec.bits = detail.cost_bits;
      trace.total_bits += detail.cost_bits;
      ++trace.iterations;
      if (t % opt.record_stride == 0 || rec.reset) {
        trace.records.push_back(rec);
        if (opt.keep_iterates) {
          trace.iterates.push_back(x_t);
        }
      }
    } catch (const DomainError& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("domain: ") + e.what();
      break;
    } catch (const NonFiniteError& e) {
      trace.aborted = true;
      trace.abort_reason = std::string("non-finite: ") + e.what();
      break;
    }
  }

  trace.x_final = state.x;
  trace.e_final = state.e;
  trace.y_final = corrected_iterate(state, hp);
  return trace;
}

} // namespace csgd
