#include "csgd/cluster.hpp"

#include <cmath>
#include <ostream>

#include "csgd/errors.hpp"

namespace csgd {

void CommLedger::add(const LedgerEntry& entry) {
  entries_.push_back(entry);
  uplink_ += entry.uplink_bits;
  downlink_ += entry.downlink_bits;
}

void CommLedger::write_csv(std::ostream& out) const {
  out << "round,worker,uplink_bits,downlink_bits\n";
  for (const auto& e : entries_) {
    out << e.round << ',' << e.worker << ',' << e.uplink_bits << ',' << e.downlink_bits << '\n';
  }
}

namespace {

struct WorkerOutput {
  ParamVector c;
  std::uint64_t bits = 0;
};

std::uint64_t dense_downlink_bits(const CompressorSpec& spec, int value_bits) {
  // Averages of RandomK messages share the index set, so they stay k-sparse.
  if (spec.kind == CompressorKind::RandomK) {
    return message_cost_bits(spec, value_bits);
  }
  return message_cost_bits(CompressorSpec::identity(spec.d), value_bits);
}

// Mean of the worker errors plus the coordinator's own error.
ParamVector averaged_error(const std::vector<WorkerState>& workers, const ParamVector& coord) {
  ParamVector e = workers.front().e;
  if (workers.size() > 1) {
    for (std::size_t i = 1; i < workers.size(); ++i) {
      e += workers[i].e;
    }
    e *= 1.0 / static_cast<double>(workers.size());
  }
  if (coord.dim() != 0) {
    e += coord;
  }
  return e;
}

} // namespace

RoundResult cluster_round(std::vector<WorkerState>& workers, ParamVector& x,
                          ParamVector& coordinator_error, std::uint64_t t,
                          const CompressorSpec& spec, const HyperParams& hp,
                          const RoundOptions& opt, CommLedger& ledger) {
  if (workers.empty()) {
    throw ParameterError("cluster_round: no workers");
  }
  const std::size_t d = x.dim();
  if (spec.d != d) {
    throw ParameterError("cluster_round: compressor dimension differs from the iterate");
  }

  ParamVector xi(d);
  artificial_noise(opt.seed, t, hp, xi);

  auto outputs = map_indices<WorkerOutput>(workers.size(), opt.exec, [&](std::size_t i) {
    WorkerState& w = workers[i];
    if (w.e.dim() != d) {
      throw ParameterError("cluster_round: worker error has the wrong dimension");
    }
    ParamVector u = w.e;
    ParamVector grad(d);
    SeededRng grad_rng = SeededRng::for_stream(opt.seed, Purpose::StochasticGradient, w.id, t);
    w.oracle.sample_gradient(x.span(), grad_rng, grad.span());
    u += grad;
    u += xi;
    SeededRng comp_rng = SeededRng::for_stream(opt.seed, Purpose::CompressorShared, 0, t);
    Compressed c = compress(spec, u, comp_rng, opt.value_bits);
    w.e = std::move(u);
    w.e -= c.c;
    return WorkerOutput{std::move(c.c), c.msg.cost_bits};
  });

  // Aggregate in worker order so the sum is independent of scheduling.
  RoundResult res;
  res.g = std::move(outputs.front().c);
  if (workers.size() > 1) {
    for (std::size_t i = 1; i < outputs.size(); ++i) {
      res.g += outputs[i].c;
    }
    res.g *= 1.0 / static_cast<double>(workers.size());
  }
  for (const auto& o : outputs) {
    res.uplink_bits += o.bits;
  }

  if (opt.compress_downlink) {
    if (coordinator_error.dim() != d) {
      coordinator_error = ParamVector(d);
    }
    ParamVector v = coordinator_error;
    v += res.g;
    SeededRng down_rng = SeededRng::for_stream(opt.seed, Purpose::Downlink, 0, t);
    Compressed c = compress(spec, v, down_rng, opt.value_bits);
    coordinator_error = std::move(v);
    coordinator_error -= c.c;
    res.g = std::move(c.c);
    res.downlink_bits = c.msg.cost_bits;
  } else {
    res.downlink_bits = dense_downlink_bits(spec, opt.value_bits);
  }

  axpy(-hp.eta, res.g.span(), x.span());
  if (!x.all_finite()) {
    throw NonFiniteError("non-finite iterate after round " + std::to_string(t));
  }
  for (std::size_t i = 0; i < workers.size(); ++i) {
    if (!workers[i].e.all_finite()) {
      throw NonFiniteError("non-finite error accumulator on worker " + std::to_string(i) +
                           " after round " + std::to_string(t));
    }
    ledger.add({t, workers[i].id, outputs[i].bits, res.downlink_bits});
  }
  return res;
}

DistributedResult distributed_run(const std::vector<StochasticOracle>& oracles,
                                  const CompressorSpec& spec, const HyperParams& hp,
                                  const ParamVector& x0, const DistributedOptions& opt) {
  spec.validate();
  const AveragedOracle averaged(oracles);
  const Objective& obj = averaged.objective();
  if (x0.dim() != obj.dim() || spec.d != obj.dim()) {
    throw ParameterError("distributed_run: starting point, compressor and objective dimensions differ");
  }
  obj.check_domain(x0.span());
  const RunOptions& ro = opt.run;
  if (ro.record_stride == 0) {
    throw ParameterError("distributed_run: record_stride must be positive");
  }

  std::vector<WorkerState> workers;
  workers.reserve(oracles.size());
  for (std::size_t i = 0; i < oracles.size(); ++i) {
    workers.push_back({i, ParamVector(x0.dim()), oracles[i]});
  }
  RoundOptions round_opt;
  round_opt.seed = ro.seed;
  round_opt.value_bits = ro.value_bits;
  round_opt.exec = opt.exec;
  round_opt.compress_downlink = opt.compress_downlink;

  const std::uint64_t T = ro.iterations.value_or(hp.T);
  const std::uint64_t period = std::max<std::uint64_t>(1, hp.escape_iterations());

  DistributedResult out;
  RunTrace& trace = out.trace;
  ParamVector x = x0;
  ParamVector coord_error;
  ParamVector anchor = x0;
  std::uint64_t t_prime = 0;
  ParamVector grad(x0.dim());
  trace.checkpoints.push_back({0, x0});

  for (std::uint64_t t = 0;; ++t) {
    try {
      IterRecord rec;
      rec.t = t;
      ParamVector e_bar = averaged_error(workers, coord_error);
      ParamVector y = x;
      axpy(-hp.eta, e_bar.span(), y.span());
      if (t < T && ro.reset_error && reset_due(t, t_prime, anchor, y, hp)) {
        rec.reset = true;
        t_prime = t;
        x = y;
        anchor = x;
        for (auto& w : workers) {
          w.e.fill(0.0);
        }
        if (coord_error.dim() != 0) {
          coord_error.fill(0.0);
        }
        e_bar.fill(0.0);
        ++trace.resets;
        trace.checkpoints.push_back({t, x});
      } else if (!ro.reset_error && t > 0 && t % period == 0 && t < T) {
        trace.checkpoints.push_back({t, x});
      }

      rec.f = obj.value(x);
      obj.gradient(x.span(), grad.span());
      rec.grad_norm = norm(grad);
      rec.err_norm = norm(e_bar);
      rec.y_drift = distance(y.span(), x0.span());
      rec.f_y = obj.in_domain(y.span()) ? obj.value(y) : std::nan("");
      if (!std::isfinite(rec.f) || !std::isfinite(rec.grad_norm)) {
        throw NonFiniteError("non-finite objective or gradient at iteration " + std::to_string(t));
      }

      const bool stop = ro.stop_below && rec.f < *ro.stop_below;
      if (stop || t >= T) {
        trace.stopped_early = stop && t < T;
        trace.records.push_back(rec);
        if (ro.keep_iterates) {
          trace.iterates.push_back(x);
        }
        break;
      }
      if (rec.grad_norm <= hp.eps) {
        ++trace.fosp_visited;
      }
      trace.grad_sq_sum += rec.grad_norm * rec.grad_norm;

      const ParamVector x_t = ro.keep_iterates ? x : ParamVector();
      const RoundResult r =
          cluster_round(workers, x, coord_error, t, spec, hp, round_opt, out.ledger);
      rec.bits = r.uplink_bits;
      trace.total_bits += r.uplink_bits;
      ++trace.iterations;
      if (t % ro.record_stride == 0 || rec.reset) {
        trace.records.push_back(rec);
        if (ro.keep_iterates) {
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

  trace.x_final = x;
  trace.e_final = averaged_error(workers, coord_error);
  trace.y_final = x;
  axpy(-hp.eta, trace.e_final.span(), trace.y_final.span());
  for (const auto& w : workers) {
    out.worker_errors.push_back(w.e);
  }
  return out;
}

} // namespace csgd
