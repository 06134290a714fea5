#include "multiexit/tiersim/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "multiexit/common/csv.hpp"

namespace multiexit::tiersim {

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  const std::size_t idx = rank == 0 ? 0 : std::min(sorted.size(), rank) - 1;
  return sorted[idx];
}

struct ExitPath {
  double compute_ms = 0.0;
  double link_ms = 0.0;
  std::vector<double> tier_ms;      // compute time per tier
  std::vector<double> tier_ops;     // operations per tier
  std::vector<double> link_values;  // values crossing each link
};

ExitPath path_for(const exitnet::MultiExitNetwork& net, const TierTopology& topo,
                  int last_block) {
  ExitPath p;
  p.tier_ms.assign(topo.tiers.size(), 0.0);
  p.tier_ops.assign(topo.tiers.size(), 0.0);
  p.link_values.assign(topo.links.size(), 0.0);
  for (int b = 1; b <= last_block; ++b) {
    const int tier = topo.partition[b - 1];
    const double ops = net.backbone()[b - 1].mac_cost();
    const double ms = ops / topo.tiers[tier].compute_rate;
    p.compute_ms += ms;
    p.tier_ms[tier] += ms;
    p.tier_ops[tier] += ops;
    if (b < last_block && topo.partition[b] > tier) {
      const double values = net.backbone()[b - 1].out_dim;
      for (int t = tier; t < topo.partition[b]; ++t) {
        p.link_ms += topo.links[t].latency_ms + values / topo.links[t].bandwidth;
        p.link_values[t] += values;
      }
    }
  }
  return p;
}

}  // namespace

SimReport simulate(const exitnet::MultiExitNetwork& net, const TierTopology& topo,
                   const std::vector<int>& exit_ordinals,
                   const std::vector<double>* energy_coefficients) {
  topo.validate(net.depth());
  const int k = net.exit_count();
  if (energy_coefficients && energy_coefficients->size() != topo.tiers.size()) {
    throw TopologyError("need one energy coefficient per tier");
  }

  std::vector<ExitPath> paths;
  paths.reserve(k + 1);
  for (int j = 0; j <= k; ++j) {
    const int last_block = j < k ? net.attach_index(j) : net.depth();
    paths.push_back(path_for(net, topo, last_block));
  }

  SimReport report;
  report.exit_ordinal = exit_ordinals;
  report.per_exit_latency.resize(k + 1);
  report.per_exit_compute.resize(k + 1);
  for (int j = 0; j <= k; ++j) {
    report.per_exit_latency[j] = paths[j].compute_ms + paths[j].link_ms;
    report.per_exit_compute[j] = paths[j].compute_ms;
  }

  std::vector<long> counts(k + 1, 0);
  report.latency_ms.reserve(exit_ordinals.size());
  for (int j : exit_ordinals) {
    if (j < 0 || j > k) throw ContractError("exit ordinal out of range in trace");
    ++counts[j];
    report.latency_ms.push_back(report.per_exit_latency[j]);
  }

  const double n = static_cast<double>(exit_ordinals.size());
  report.exit_fraction.assign(k + 1, 0.0);
  report.tier_busy_ms.assign(topo.tiers.size(), 0.0);
  report.tier_energy.assign(topo.tiers.size(), 0.0);
  report.link_values.assign(topo.links.size(), 0.0);
  for (int j = 0; j <= k; ++j) {
    if (n > 0) report.exit_fraction[j] = static_cast<double>(counts[j]) / n;
    for (std::size_t t = 0; t < topo.tiers.size(); ++t) {
      report.tier_busy_ms[t] += counts[j] * paths[j].tier_ms[t];
      const double coeff = energy_coefficients ? (*energy_coefficients)[t] : 1.0;
      report.tier_energy[t] += counts[j] * paths[j].tier_ops[t] * coeff;
    }
    for (std::size_t t = 0; t < topo.links.size(); ++t) {
      report.link_values[t] += counts[j] * paths[j].link_values[t];
    }
    report.mean_cost += report.exit_fraction[j] * report.per_exit_latency[j];
  }

  double busy_total = 0.0;
  for (double b : report.tier_busy_ms) busy_total += b;
  report.tier_utilization.assign(topo.tiers.size(), 0.0);
  if (busy_total > 0.0) {
    for (std::size_t t = 0; t < topo.tiers.size(); ++t) {
      report.tier_utilization[t] = report.tier_busy_ms[t] / busy_total;
    }
  }

  if (!report.latency_ms.empty()) {
    double sum = 0.0;
    for (double v : report.latency_ms) sum += v;
    report.mean_latency_ms = sum / n;
    auto sorted = report.latency_ms;
    std::sort(sorted.begin(), sorted.end());
    report.p50_ms = nearest_rank(sorted, 0.50);
    report.p95_ms = nearest_rank(sorted, 0.95);
    report.p99_ms = nearest_rank(sorted, 0.99);
  }
  return report;
}

SimReport simulate(const exitnet::MultiExitNetwork& net, const TierTopology& topo,
                   const inferkit::ExitPolicy& policy, const Dataset& data) {
  const auto result = inferkit::run_adaptive_inference(net, policy, data);
  return simulate(net, topo, result.ledger.exit_ordinal);
}

PartitionRanking compare_partitions(const exitnet::MultiExitNetwork& net,
                                    const std::vector<TierTopology>& candidates,
                                    const std::vector<int>& exit_ordinals) {
  if (candidates.size() < 2) {
    throw ContractError("partition comparison needs at least two candidates");
  }
  PartitionRanking ranking;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto report = simulate(net, candidates[c], exit_ordinals);
    ranking.ranked.push_back({c, report.mean_latency_ms, report.p95_ms});
  }
  std::stable_sort(ranking.ranked.begin(), ranking.ranked.end(),
                   [](const PartitionRanking::Entry& a, const PartitionRanking::Entry& b) {
                     if (a.mean_latency_ms != b.mean_latency_ms) {
                       return a.mean_latency_ms < b.mean_latency_ms;
                     }
                     return a.p95_ms < b.p95_ms;
                   });
  return ranking;
}

void save_sim_report_csv(const SimReport& report, const std::string& path) {
  CsvWriter w(path, {"sample", "exit_ordinal", "latency_ms", "link_ms"});
  for (std::size_t i = 0; i < report.latency_ms.size(); ++i) {
    const int j = report.exit_ordinal[i];
    const double link = report.per_exit_latency[j] - report.per_exit_compute[j];
    w.row({std::to_string(i), std::to_string(j), fmt_double(report.latency_ms[i]),
           fmt_double(link)});
  }
}

}  // namespace multiexit::tiersim
