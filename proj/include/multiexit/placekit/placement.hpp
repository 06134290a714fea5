#pragma once

#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/inferkit/policy.hpp"
#include "multiexit/placekit/cost_profile.hpp"

namespace multiexit::placekit {

// Keeping exit i pays off when the saved downstream work outweighs the
// cost of the traffic that continues past it:
//   (gamma_{i+1} - gamma_i) * (I_i - I_{i+1}) > gamma_i * I_{i+1},
// gammas cumulative. 1-based i with i+1 <= L.
bool efficiency_test(const CostProfile& profile, int i);

struct PlacementDecision {
  int index = 0;
  bool kept = false;
  double lhs = 0.0;  // evaluated left-hand side of the keep rule
};

struct PlacementPlan {
  std::vector<int> chosen;
  std::vector<PlacementDecision> decisions;
  double th = 0.0;
};

// Greedy front-to-back scan: exit i survives when
//   (TH - cm_i)*gamma_f_{i+1} - (1 - cm_i)*gamma_c_i - (1 - TH)*gamma_f_i >= 0
// with cm_i = I_{i+1}/I_i. Every candidate's evaluation is recorded.
PlacementPlan greedy_placement(const CostProfile& profile, double th);

// Expected per-sample cost of running the cascade with exits at `chosen`
// (sorted, 1-based), computed from the profile's exit-survival fractions;
// consulted heads are charged along the way.
double expected_cascade_cost(const CostProfile& profile, const std::vector<int>& chosen);

struct ExhaustiveResult {
  std::vector<int> chosen;
  double cost = 0.0;
  std::size_t subsets_evaluated = 0;
};

// Enumerates every subset of candidates {1..L-1} up to size max_exits and
// returns the cheapest under expected_cascade_cost. Ties prefer fewer
// exits, then lexicographically smaller index sets. Depth is capped at 20.
ExhaustiveResult exhaustive_placement(const CostProfile& profile, int max_exits);

// One exit per requested percentile of total backbone cost: the smallest
// i with gamma_i >= p * gamma_L. Percentiles must be increasing in (0,1).
std::vector<int> percentile_placement(const CostProfile& profile,
                                      const std::vector<double>& percentiles);

// Reduction of the constant-vs-adaptive head check: keeps the exits whose
// head beats a majority-class constant predictor on the validation set by
// more than `margin` (default half a point).
std::vector<int> prune_constant_beatable(const exitnet::MultiExitNetwork& net,
                                         const Dataset& validation, double margin = 0.005);

// Measured share of samples that evaluate each backbone block (length L,
// first entry always 1) under the given policy; runs adaptive inference.
std::vector<double> measure_exit_fractions(const exitnet::MultiExitNetwork& net,
                                           const inferkit::ExitPolicy& policy,
                                           const Dataset& data);

// Convenience: static profile with measured reach fractions filled in.
CostProfile measured_cost_profile(const exitnet::MultiExitNetwork& net,
                                  const inferkit::ExitPolicy& policy, const Dataset& data,
                                  const exitnet::HeadSpec& candidate_head = {});

}  // namespace multiexit::placekit
