#pragma once

#include <vector>

#include "multiexit/common/errors.hpp"
#include "multiexit/exitnet/network.hpp"

namespace multiexit::placekit {

// Per-layer cost model under the one-candidate-exit-per-block view.
// block_cost[i] is the operation count of backbone block i+1 alone,
// head_cost[i] the count of a candidate head attached there, and
// reach_fraction[i] the share of traffic still alive when block i+1 is
// reached (so reach_fraction[0] == 1).
struct CostProfile {
  std::vector<double> block_cost;      // gamma_f, length L
  std::vector<double> head_cost;       // gamma_c, length L (last entry unused: the final
                                       // exit is the backbone classifier itself)
  std::vector<double> reach_fraction;  // I, length L

  int depth() const { return static_cast<int>(block_cost.size()); }

  // Cumulative backbone cost through block i (1-based).
  double cumulative(int i) const;
  double total() const { return cumulative(depth()); }

  // I_{i+1}/I_i for 1-based i; defined as 1 when I_i == 0 (a dead exit
  // compresses nothing).
  double compression_ratio(int i) const;

  void validate() const;
};

// Static operation counts from block shapes: dense in*out, activations
// out_dim, identity free. Candidate head costs are computed for the given
// head layout at every block boundary.
CostProfile static_cost_profile(const exitnet::MultiExitNetwork& net,
                                const exitnet::HeadSpec& candidate_head = {});

// Per-candidate-position head cost for a given layout.
double head_cost_for(int embed_dim, int class_count, const exitnet::HeadSpec& spec);

// Wall-clock calibration: scales each block's operation count by a
// measured per-block multiplier (one positive factor per block).
CostProfile scaled_profile(const CostProfile& profile,
                           const std::vector<double>& block_multipliers);

// Profile CSV: columns index,gamma_f,gamma_c,I.
void save_profile_csv(const CostProfile& profile, const std::string& path);
CostProfile load_profile_csv(const std::string& path);

}  // namespace multiexit::placekit
