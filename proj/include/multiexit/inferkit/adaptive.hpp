#pragma once

#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/exitnet/network.hpp"
#include "multiexit/inferkit/policy.hpp"
#include "multiexit/placekit/cost_profile.hpp"

namespace multiexit::inferkit {

// Execution record of one adaptive-inference run. Ordinal j in [0, K)
// indexes the exits in attach order; ordinal K is the final backbone exit.
// per_exit_cost[j] is the operation count a sample pays when it ends at
// ordinal j under this policy's execution pattern (cascading policies
// consult every head on the way down; targeted policies only their own).
struct CostLedger {
  int exit_points = 0;
  std::vector<int> exit_ordinal;       // per sample
  std::vector<double> per_exit_cost;   // epsilon, length exit_points
  std::vector<long> exit_counts;       // per ordinal
  std::vector<double> exit_fraction;   // share exiting exactly at ordinal j
  std::vector<double> reach_fraction;  // share reaching ordinal j
  std::vector<double> block_reach;     // share evaluating backbone block i, length L

  // Average cost: sum_i sum_j delta_ij * eps_j / n with delta one-hot at
  // the taken exit.
  double average_cost() const;
  std::vector<std::vector<int>> delta_matrix() const;
};

struct AdaptiveResult {
  std::vector<int> predicted_class;
  CostLedger ledger;

  double accuracy(const std::vector<int>& labels) const;
};

// Per sample: walk the exits in order, stop at the first positive
// decision, fall through to the final exit otherwise. Block costs come
// from `profile` when given (otherwise static counts); head costs always
// reflect the network's actual heads. `cost_override` replaces the
// per-ordinal costs wholesale (abstract costs, e.g. with communication).
AdaptiveResult run_adaptive_inference(const exitnet::MultiExitNetwork& net,
                                      const ExitPolicy& policy, const Dataset& data,
                                      const placekit::CostProfile* profile = nullptr,
                                      const std::vector<double>* cost_override = nullptr);

// Operation count of one attached head (pool pass + its layers).
double attached_head_cost(const exitnet::MultiExitNetwork& net, int ordinal);

// Cost of finishing at each exit point when every head is consulted on
// the way down: blocks to the attach point plus all heads so far. This is
// the default epsilon for cascading policies.
std::vector<double> cascade_exit_costs(const exitnet::MultiExitNetwork& net,
                                       const placekit::CostProfile* profile = nullptr);

// Ledger CSV: sample id, exit ordinal, attach index, predicted class,
// label, cost.
void save_ledger_csv(const AdaptiveResult& result, const Dataset& data, const std::string& path);

// Reads back the per-sample exit ordinals from a ledger CSV.
std::vector<int> load_ledger_exits(const std::string& path);

}  // namespace multiexit::inferkit
