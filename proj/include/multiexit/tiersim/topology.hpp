#pragma once

#include <limits>
#include <string>
#include <vector>

#include "multiexit/common/errors.hpp"

namespace multiexit::tiersim {

// Ordered compute tiers joined by point-to-point links. Blocks are pinned
// to tiers by a monotone partition; auxiliary heads run co-located with
// their attach block. A link bandwidth of +infinity models an
// instantaneous channel.
struct TierTopology {
  struct Tier {
    std::string name;
    double compute_rate = 0.0;  // operation count per millisecond
  };
  struct Link {
    double latency_ms = 0.0;
    double bandwidth = std::numeric_limits<double>::infinity();  // values per millisecond
  };

  std::vector<Tier> tiers;
  std::vector<Link> links;    // exactly tiers.size() - 1, between consecutive tiers
  std::vector<int> partition; // per backbone block, 0-based tier index, nondecreasing
  double bytes_per_value = 4.0;  // used when a link declares byte-rate bandwidth

  void validate(int depth) const;
};

TierTopology load_topology_json(const std::string& path);
void save_topology_json(const TierTopology& topo, const std::string& path);

}  // namespace multiexit::tiersim
