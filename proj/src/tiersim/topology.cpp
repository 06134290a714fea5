#include "multiexit/tiersim/topology.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace multiexit::tiersim {

void TierTopology::validate(int depth) const {
  if (tiers.empty()) throw TopologyError("topology needs at least one tier");
  if (links.size() + 1 != tiers.size()) {
    throw TopologyError("expected one link between each pair of consecutive tiers");
  }
  for (const auto& t : tiers) {
    if (!(t.compute_rate > 0.0)) throw TopologyError("tier compute rates must be positive");
  }
  for (const auto& l : links) {
    if (l.latency_ms < 0.0) throw TopologyError("link latency must be nonnegative");
    if (!(l.bandwidth > 0.0)) throw TopologyError("link bandwidth must be positive");
  }
  if (static_cast<int>(partition.size()) != depth) {
    throw TopologyError("partition must assign every backbone block (got " +
                        std::to_string(partition.size()) + " of " + std::to_string(depth) + ")");
  }
  int prev = 0;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    const int t = partition[i];
    if (t < 0 || t >= static_cast<int>(tiers.size())) {
      throw TopologyError("partition references unknown tier " + std::to_string(t));
    }
    if (t < prev) throw TopologyError("partition must be nondecreasing in block index");
    prev = t;
  }
}

TierTopology load_topology_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open topology file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("topology parse failure in " + path + ": " + e.what());
  }
  TierTopology topo;
  topo.bytes_per_value = doc.value("bytes_per_value", 4.0);
  for (const auto& t : doc.at("tiers")) {
    TierTopology::Tier tier;
    tier.name = t.value("name", "tier" + std::to_string(topo.tiers.size()));
    tier.compute_rate = t.at("compute_rate").get<double>();
    topo.tiers.push_back(std::move(tier));
  }
  for (const auto& l : doc.at("links")) {
    TierTopology::Link link;
    link.latency_ms = l.value("latency_ms", 0.0);
    if (l.contains("bandwidth") && !l.at("bandwidth").is_null()) {
      link.bandwidth = l.at("bandwidth").get<double>();
    } else if (l.contains("bandwidth_bytes") && !l.at("bandwidth_bytes").is_null()) {
      link.bandwidth = l.at("bandwidth_bytes").get<double>() / topo.bytes_per_value;
    }
    topo.links.push_back(link);
  }
  topo.partition = doc.at("partition").get<std::vector<int>>();
  return topo;
}

void save_topology_json(const TierTopology& topo, const std::string& path) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["bytes_per_value"] = topo.bytes_per_value;
  auto& tiers = doc["tiers"] = nlohmann::json::array();
  for (const auto& t : topo.tiers) {
    tiers.push_back({{"name", t.name}, {"compute_rate", t.compute_rate}});
  }
  auto& links = doc["links"] = nlohmann::json::array();
  for (const auto& l : topo.links) {
    nlohmann::json entry;
    entry["latency_ms"] = l.latency_ms;
    if (std::isfinite(l.bandwidth)) {
      entry["bandwidth"] = l.bandwidth;
    } else {
      entry["bandwidth"] = nullptr;
    }
    links.push_back(std::move(entry));
  }
  doc["partition"] = topo.partition;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open topology file for writing: " + path);
  out << doc.dump(1) << "\n";
}

}  // namespace multiexit::tiersim
