#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "csgd/optimizer.hpp"
#include "csgd/parallel.hpp"

namespace csgd {

struct WorkerState {
  std::size_t id = 0;
  ParamVector e;
  StochasticOracle oracle;
};

struct LedgerEntry {
  std::uint64_t round = 0;
  std::size_t worker = 0;
  std::uint64_t uplink_bits = 0;
  std::uint64_t downlink_bits = 0;
};

/// Per-round, per-worker message sizes with running totals.
class CommLedger {
public:
  void add(const LedgerEntry& entry);
  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
  std::uint64_t total_uplink() const noexcept { return uplink_; }
  std::uint64_t total_downlink() const noexcept { return downlink_; }
  /// Columns round,worker,uplink_bits,downlink_bits.
  void write_csv(std::ostream& out) const;

private:
  std::vector<LedgerEntry> entries_;
  std::uint64_t uplink_ = 0;
  std::uint64_t downlink_ = 0;
};

struct RoundOptions {
  std::uint64_t seed = 0;
  int value_bits = 64;
  Exec exec = Exec::Serial;
  /// Re-compress the average before broadcasting, with error feedback kept by
  /// the coordinator in `coordinator_error`.
  bool compress_downlink = false;
};

struct RoundResult {
  ParamVector g; // broadcast update
  std::uint64_t uplink_bits = 0;   // summed over workers
  std::uint64_t downlink_bits = 0; // per worker
};

/// One synchronous round at iteration t: worker i forms
/// u_i = e_i + grad F_i(x, theta_i) + xi_t and sends C(u_i, theta~_t) (shared
/// theta~_t and xi_t); the coordinator averages, x <- x - eta g, e_i <- u_i - g_i.
RoundResult cluster_round(std::vector<WorkerState>& workers, ParamVector& x,
                          ParamVector& coordinator_error, std::uint64_t t,
                          const CompressorSpec& spec, const HyperParams& hp,
                          const RoundOptions& opt, CommLedger& ledger);

struct DistributedOptions {
  RunOptions run;
  Exec exec = Exec::Serial;
  bool compress_downlink = false;
};

struct DistributedResult {
  RunTrace trace;
  CommLedger ledger;
  std::vector<ParamVector> worker_errors; // final e_i
};

/// Compressed SGD with error feedback on W = oracles.size() simulated workers. The reset test runs on
/// the coordinator using the averaged error; a reset zeroes every e_i. Records
/// describe the averaged objective. Results do not depend on `exec`.
DistributedResult distributed_run(const std::vector<StochasticOracle>& oracles,
                                  const CompressorSpec& spec, const HyperParams& hp,
                                  const ParamVector& x0, const DistributedOptions& opt = {});

} // namespace csgd
