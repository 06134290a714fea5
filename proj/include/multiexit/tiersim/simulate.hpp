#pragma once

#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/exitnet/network.hpp"
#include "multiexit/inferkit/adaptive.hpp"
#include "multiexit/tiersim/topology.hpp"

namespace multiexit::tiersim {

// Trace-driven, sequential replay: a sample exiting at exit point j pays
// the compute time of blocks up to its stopping block at their tiers'
// rates, plus latency and transfer time for every link it crosses (the
// transferred value count is the boundary block's output width). No
// queueing or contention is modeled.
struct SimReport {
  std::vector<double> latency_ms;        // per sample
  std::vector<int> exit_ordinal;         // per sample (copied from the trace)
  std::vector<double> per_exit_latency;  // deterministic latency per exit point
  std::vector<double> per_exit_compute;  // compute share of the above
  std::vector<double> exit_fraction;
  std::vector<double> tier_busy_ms;      // total compute time per tier
  std::vector<double> tier_utilization;  // share of total compute time
  std::vector<double> link_values;       // values transferred per link
  std::vector<double> tier_energy;       // operations executed per tier * coefficient
  double mean_latency_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  // Average cost in the delta/epsilon form with epsilon = per-exit
  // latency (communication included).
  double mean_cost = 0.0;
};

// Replays per-sample exit ordinals (exit_count() meaning the final exit).
SimReport simulate(const exitnet::MultiExitNetwork& net, const TierTopology& topo,
                   const std::vector<int>& exit_ordinals,
                   const std::vector<double>* energy_coefficients = nullptr);

// Runs adaptive inference live and replays its ledger.
SimReport simulate(const exitnet::MultiExitNetwork& net, const TierTopology& topo,
                   const inferkit::ExitPolicy& policy, const Dataset& data);

struct PartitionRanking {
  struct Entry {
    std::size_t candidate = 0;
    double mean_latency_ms = 0.0;
    double p95_ms = 0.0;
  };
  std::vector<Entry> ranked;  // best (lowest mean, then lowest p95) first
};

PartitionRanking compare_partitions(const exitnet::MultiExitNetwork& net,
                                    const std::vector<TierTopology>& candidates,
                                    const std::vector<int>& exit_ordinals);

// Report CSV: sample id, exit ordinal, latency, link time.
void save_sim_report_csv(const SimReport& report, const std::string& path);

}  // namespace multiexit::tiersim
