#include "multiexit/placekit/placement.hpp"

#include <algorithm>

#include "multiexit/inferkit/adaptive.hpp"

namespace multiexit::placekit {

bool efficiency_test(const CostProfile& profile, int i) {
  if (i < 1 || i + 1 > profile.depth()) throw IndexError("efficiency test needs i and i+1 in range");
  const double gamma_i = profile.cumulative(i);
  const double gamma_next = profile.cumulative(i + 1);
  const double reach_i = profile.reach_fraction[i - 1];
  const double reach_next = profile.reach_fraction[i];
  return (gamma_next - gamma_i) * (reach_i - reach_next) > gamma_i * reach_next;
}

PlacementPlan greedy_placement(const CostProfile& profile, double th) {
  if (th < 0.0 || th > 1.0) throw ConfigError("TH must lie in [0,1]");
  profile.validate();
  PlacementPlan plan;
  plan.th = th;
  for (int i = 1; i < profile.depth(); ++i) {
    const double cm = profile.compression_ratio(i);
    const double lhs = (th - cm) * profile.block_cost[i] -
                       (1.0 - cm) * profile.head_cost[i - 1] -
                       (1.0 - th) * profile.block_cost[i - 1];
    PlacementDecision d;
    d.index = i;
    d.lhs = lhs;
    d.kept = lhs >= 0.0;
    if (d.kept) plan.chosen.push_back(i);
    plan.decisions.push_back(d);
  }
  return plan;
}

double expected_cascade_cost(const CostProfile& profile, const std::vector<int>& chosen) {
  const int depth = profile.depth();
  // Exit-exactly mass per candidate position; whatever reaches the last
  // block leaves there.
  std::vector<double> exit_mass(depth + 1, 0.0);
  for (int i = 1; i < depth; ++i) {
    exit_mass[i] = profile.reach_fraction[i - 1] - profile.reach_fraction[i];
  }
  exit_mass[depth] = profile.reach_fraction[depth - 1];

  double cost = 0.0;
  double heads_so_far = 0.0;
  int window_start = 1;  // first candidate whose mass falls through to the next kept exit
  for (int s : chosen) {
    if (s < 1 || s >= depth) throw PlacementError("chosen exit index out of range");
    if (s < window_start) throw PlacementError("chosen exits must be strictly increasing");
    heads_so_far += profile.head_cost[s - 1];
    double mass = 0.0;
    for (int i = window_start; i <= s; ++i) mass += exit_mass[i];
    cost += mass * (profile.cumulative(s) + heads_so_far);
    window_start = s + 1;
  }
  double mass = 0.0;
  for (int i = window_start; i <= depth; ++i) mass += exit_mass[i];
  cost += mass * (profile.total() + heads_so_far);
  return cost;
}

ExhaustiveResult exhaustive_placement(const CostProfile& profile, int max_exits) {
  profile.validate();
  const int depth = profile.depth();
  if (depth > 20) {
    throw ContractError("exhaustive placement is capped at depth 20 (2^(L-1) subsets)");
  }
  const int candidates = depth - 1;
  ExhaustiveResult best;
  best.cost = expected_cascade_cost(profile, {});
  best.subsets_evaluated = 1;
  for (std::uint32_t mask = 1; mask < (1u << candidates); ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < candidates; ++i) {
      if (mask & (1u << i)) subset.push_back(i + 1);
    }
    if (max_exits >= 0 && static_cast<int>(subset.size()) > max_exits) continue;
    ++best.subsets_evaluated;
    const double cost = expected_cascade_cost(profile, subset);
    // Strictly better wins; ties prefer fewer exits, then smaller indices.
    const bool better =
        cost < best.cost ||
        (cost == best.cost && (subset.size() < best.chosen.size() ||
                               (subset.size() == best.chosen.size() && subset < best.chosen)));
    if (better) {
      best.cost = cost;
      best.chosen = subset;
    }
  }
  return best;
}

std::vector<int> percentile_placement(const CostProfile& profile,
                                      const std::vector<double>& percentiles) {
  for (std::size_t i = 0; i < percentiles.size(); ++i) {
    if (percentiles[i] <= 0.0 || percentiles[i] >= 1.0) {
      throw ConfigError("percentiles must lie strictly inside (0,1)");
    }
    if (i > 0 && percentiles[i] <= percentiles[i - 1]) {
      throw ConfigError("percentiles must be increasing");
    }
  }
  const double total = profile.total();
  std::vector<int> out;
  for (double p : percentiles) {
    const double target = p * total;
    for (int i = 1; i <= profile.depth(); ++i) {
      if (profile.cumulative(i) >= target) {
        if (out.empty() || out.back() != i) out.push_back(i);
        break;
      }
    }
  }
  return out;
}

std::vector<double> measure_exit_fractions(const exitnet::MultiExitNetwork& net,
                                           const inferkit::ExitPolicy& policy,
                                           const Dataset& data) {
  const auto result = inferkit::run_adaptive_inference(net, policy, data);
  return result.ledger.block_reach;
}

CostProfile measured_cost_profile(const exitnet::MultiExitNetwork& net,
                                  const inferkit::ExitPolicy& policy, const Dataset& data,
                                  const exitnet::HeadSpec& candidate_head) {
  CostProfile profile = static_cost_profile(net, candidate_head);
  profile.reach_fraction = measure_exit_fractions(net, policy, data);
  return profile;
}

std::vector<int> prune_constant_beatable(const exitnet::MultiExitNetwork& net,
                                         const Dataset& validation, double margin) {
  if (validation.size() == 0) throw ContractError("empty validation set");
  std::vector<long> class_counts(net.class_count(), 0);
  for (int y : validation.labels) ++class_counts.at(y);
  const double majority =
      static_cast<double>(*std::max_element(class_counts.begin(), class_counts.end())) /
      static_cast<double>(validation.size());

  std::vector<int> kept;
  for (int j = 0; j < net.exit_count(); ++j) {
    long correct = 0;
    for (std::size_t s = 0; s < validation.size(); ++s) {
      const auto r = net.eval_until(validation.row(s), j);
      const int pred = static_cast<int>(
          std::max_element(r.prediction.begin(), r.prediction.end()) - r.prediction.begin());
      if (pred == validation.labels[s]) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(validation.size());
    if (acc > majority + margin) kept.push_back(net.attach_index(j));
  }
  return kept;
}

}  // namespace multiexit::placekit
