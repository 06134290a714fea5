#include "multiexit/inferkit/adaptive.hpp"

#include <algorithm>

#include "multiexit/common/csv.hpp"

namespace multiexit::inferkit {

double CostLedger::average_cost() const {
  if (exit_ordinal.empty()) return 0.0;
  double total = 0.0;
  for (int j = 0; j < exit_points; ++j) {
    total += static_cast<double>(exit_counts[j]) * per_exit_cost[j];
  }
  return total / static_cast<double>(exit_ordinal.size());
}

std::vector<std::vector<int>> CostLedger::delta_matrix() const {
  std::vector<std::vector<int>> delta(exit_ordinal.size(), std::vector<int>(exit_points, 0));
  for (std::size_t i = 0; i < exit_ordinal.size(); ++i) delta[i][exit_ordinal[i]] = 1;
  return delta;
}

double AdaptiveResult::accuracy(const std::vector<int>& labels) const {
  if (labels.size() != predicted_class.size()) throw DimensionError("label count mismatch");
  if (labels.empty()) return 0.0;
  long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted_class[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double attached_head_cost(const exitnet::MultiExitNetwork& net, int ordinal) {
  const auto& head = net.exits().at(ordinal);
  double cost = head.pool_to > 0 ? net.embedding_dim(ordinal) : 0.0;
  for (const auto& layer : head.layers) cost += layer.mac_cost();
  return cost;
}

std::vector<double> cascade_exit_costs(const exitnet::MultiExitNetwork& net,
                                       const placekit::CostProfile* profile) {
  placekit::CostProfile static_profile;
  if (!profile) {
    static_profile = placekit::static_cost_profile(net);
    profile = &static_profile;
  }
  const int k = net.exit_count();
  std::vector<double> eps(k + 1, 0.0);
  double heads_so_far = 0.0;
  for (int j = 0; j < k; ++j) {
    heads_so_far += attached_head_cost(net, j);
    eps[j] = profile->cumulative(net.attach_index(j)) + heads_so_far;
  }
  eps[k] = profile->cumulative(net.depth()) + heads_so_far;
  return eps;
}

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Realized cost of finishing at ordinal j under the policy's execution
// pattern.
std::vector<double> realized_costs(const exitnet::MultiExitNetwork& net, const ExitPolicy& policy,
                                   const placekit::CostProfile& profile) {
  if (policy.cascades()) return cascade_exit_costs(net, &profile);
  const int k = net.exit_count();
  std::vector<double> eps(k + 1, 0.0);
  for (int j = 0; j < k; ++j) {
    eps[j] = profile.cumulative(net.attach_index(j)) + attached_head_cost(net, j);
  }
  eps[k] = profile.cumulative(net.depth());
  return eps;
}

}  // namespace

AdaptiveResult run_adaptive_inference(const exitnet::MultiExitNetwork& net,
                                      const ExitPolicy& policy, const Dataset& data,
                                      const placekit::CostProfile* profile,
                                      const std::vector<double>* cost_override) {
  if (policy.kind == PolicyKind::LearnedGate && !net.has_gates()) {
    throw ConfigError("learned-gate policy requires a gated network");
  }
  if (policy.kind == PolicyKind::FixedExit &&
      (policy.fixed_exit < 0 || policy.fixed_exit > net.exit_count())) {
    throw ConfigError("fixed exit ordinal out of range");
  }

  placekit::CostProfile static_profile;
  if (!profile) {
    static_profile = placekit::static_cost_profile(net);
    profile = &static_profile;
  }

  const int k = net.exit_count();
  AdaptiveResult result;
  auto& ledger = result.ledger;
  ledger.exit_points = k + 1;
  ledger.per_exit_cost = realized_costs(net, policy, *profile);
  if (cost_override) {
    if (cost_override->size() != static_cast<std::size_t>(k + 1)) {
      throw ConfigError("cost override must provide one value per exit point");
    }
    ledger.per_exit_cost = *cost_override;
  }
  ledger.exit_counts.assign(k + 1, 0);
  ledger.block_reach.assign(net.depth(), 0.0);

  const std::size_t n = data.size();
  result.predicted_class.resize(n);
  ledger.exit_ordinal.resize(n);

  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> h(data.row(s).begin(), data.row(s).end());
    int taken = k;
    std::vector<double> prediction;
    int block = 0;
    for (int j = 0; j < k && taken == k; ++j) {
      const int attach = net.attach_index(j);
      // Targeted policies skip heads they will not consult.
      const bool consult =
          policy.cascades() || (policy.kind == PolicyKind::FixedExit && policy.fixed_exit == j);
      if (!consult) continue;
      while (block < attach) {
        h = net.backbone()[block].eval(h, 1);
        ledger.block_reach[block] += 1.0;
        ++block;
      }
      auto logits = net.eval_head_logits(j, h, 1);
      auto probs = net.exits()[j].layers.back().eval(logits, 1);
      double gate = 0.0;
      if (policy.kind == PolicyKind::LearnedGate) {
        gate = net.eval_gate(j, logits, h);
      }
      if (decide_exit(policy, j, probs, gate, net.class_count())) {
        taken = j;
        prediction = std::move(probs);
      }
    }
    if (taken == k) {
      while (block < net.depth()) {
        h = net.backbone()[block].eval(h, 1);
        ledger.block_reach[block] += 1.0;
        ++block;
      }
      prediction = std::move(h);
    }
    ledger.exit_ordinal[s] = taken;
    ++ledger.exit_counts[taken];
    result.predicted_class[s] = argmax(prediction);
  }

  ledger.exit_fraction.assign(k + 1, 0.0);
  ledger.reach_fraction.assign(k + 1, 0.0);
  if (n > 0) {
    for (int j = 0; j <= k; ++j) {
      ledger.exit_fraction[j] = static_cast<double>(ledger.exit_counts[j]) / static_cast<double>(n);
    }
    double still_alive = 1.0;
    for (int j = 0; j <= k; ++j) {
      ledger.reach_fraction[j] = still_alive;
      still_alive -= ledger.exit_fraction[j];
    }
    for (auto& r : ledger.block_reach) r /= static_cast<double>(n);
  }
  return result;
}

void save_ledger_csv(const AdaptiveResult& result, const Dataset& data, const std::string& path) {
  CsvWriter w(path, {"sample", "exit_ordinal", "predicted", "label", "cost"});
  for (std::size_t i = 0; i < result.predicted_class.size(); ++i) {
    const int j = result.ledger.exit_ordinal[i];
    w.row({std::to_string(i), std::to_string(j), std::to_string(result.predicted_class[i]),
           std::to_string(data.labels[i]), fmt_double(result.ledger.per_exit_cost[j])});
  }
}

std::vector<int> load_ledger_exits(const std::string& path) {
  const auto table = read_csv(path);
  std::size_t col = 0;
  bool found = false;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == "exit_ordinal") {
      col = i;
      found = true;
    }
  }
  if (!found) throw ParseError("ledger CSV lacks an exit_ordinal column");
  std::vector<int> exits;
  exits.reserve(table.rows.size());
  for (const auto& row : table.rows) exits.push_back(std::stoi(row.at(col)));
  return exits;
}

}  // namespace multiexit::inferkit
