#include "multiexit/inferkit/policy.hpp"

#include <algorithm>
#include <cmath>

namespace multiexit::inferkit {

double normalized_entropy(std::span<const double> pred, int class_count) {
  if (class_count < 2) throw ContractError("normalized entropy needs at least 2 classes");
  double h = 0.0;
  for (double p : pred) {
    if (p > 0.0) h -= p * std::log(p);
  }
  h /= std::log(static_cast<double>(class_count));
  return std::min(1.0, std::max(0.0, h));
}

std::string policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::EntropyThreshold: return "entropy";
    case PolicyKind::MaxConfidence: return "max_confidence";
    case PolicyKind::LearnedGate: return "learned_gate";
    case PolicyKind::AlwaysFinal: return "always_final";
    case PolicyKind::FixedExit: return "fixed_exit";
  }
  return "?";
}

PolicyKind policy_kind_from_name(const std::string& name) {
  if (name == "entropy") return PolicyKind::EntropyThreshold;
  if (name == "max_confidence") return PolicyKind::MaxConfidence;
  if (name == "learned_gate") return PolicyKind::LearnedGate;
  if (name == "always_final") return PolicyKind::AlwaysFinal;
  if (name == "fixed_exit") return PolicyKind::FixedExit;
  throw ParseError("unknown policy kind: " + name);
}

ExitPolicy ExitPolicy::entropy(std::vector<double> beta) {
  for (double b : beta) {
    if (b < 0.0 || b > 1.0) throw ConfigError("entropy threshold outside [0,1]");
  }
  ExitPolicy p;
  p.kind = PolicyKind::EntropyThreshold;
  p.beta = std::move(beta);
  return p;
}

ExitPolicy ExitPolicy::entropy(double beta) { return entropy(std::vector<double>{beta}); }

ExitPolicy ExitPolicy::max_confidence(double beta) {
  if (beta < 0.0 || beta > 1.0) throw ConfigError("confidence threshold outside [0,1]");
  ExitPolicy p;
  p.kind = PolicyKind::MaxConfidence;
  p.beta = {beta};
  return p;
}

ExitPolicy ExitPolicy::learned_gate(double cutoff) {
  ExitPolicy p;
  p.kind = PolicyKind::LearnedGate;
  p.gate_cutoff = cutoff;
  return p;
}

ExitPolicy ExitPolicy::always_final() { return {}; }

ExitPolicy ExitPolicy::fixed(int ordinal) {
  ExitPolicy p;
  p.kind = PolicyKind::FixedExit;
  p.fixed_exit = ordinal;
  return p;
}

double ExitPolicy::threshold_for(int ordinal) const {
  if (beta.empty()) throw ConfigError("policy has no thresholds");
  if (beta.size() == 1) return beta[0];
  if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= beta.size()) {
    throw IndexError("no threshold for exit ordinal " + std::to_string(ordinal));
  }
  return beta[ordinal];
}

bool decide_exit(const ExitPolicy& policy, int ordinal, std::span<const double> prediction,
                 double gate_value, int class_count) {
  switch (policy.kind) {
    case PolicyKind::EntropyThreshold:
      // Ties stop: beta = 1 is the "always stop" boundary.
      return normalized_entropy(prediction, class_count) <= policy.threshold_for(ordinal);
    case PolicyKind::MaxConfidence: {
      const double mx = *std::max_element(prediction.begin(), prediction.end());
      return mx >= policy.threshold_for(ordinal);
    }
    case PolicyKind::LearnedGate:
      return gate_value >= policy.gate_cutoff;
    case PolicyKind::AlwaysFinal:
      return false;
    case PolicyKind::FixedExit:
      return ordinal == policy.fixed_exit;
  }
  return false;
}

}  // namespace multiexit::inferkit
