#pragma once

#include <span>
#include <string>
#include <vector>

#include "multiexit/common/errors.hpp"

namespace multiexit::inferkit {

// -(1/log C) * sum p log p with 0 log 0 := 0, clamped into [0,1].
// Uniform predictions score 1, one-hot predictions 0.
double normalized_entropy(std::span<const double> pred, int class_count);

enum class PolicyKind {
  EntropyThreshold,
  MaxConfidence,
  LearnedGate,
  AlwaysFinal,
  FixedExit,
};

std::string policy_kind_name(PolicyKind kind);
PolicyKind policy_kind_from_name(const std::string& name);

// Per-sample stop-or-continue rule evaluated at each exit in turn.
struct ExitPolicy {
  PolicyKind kind = PolicyKind::AlwaysFinal;
  std::vector<double> beta;      // per-exit thresholds; single entry broadcasts
  double gate_cutoff = 0.5;      // binarization point for learned gates
  int fixed_exit = 0;            // ordinal for FixedExit; exit_count() means final

  static ExitPolicy entropy(std::vector<double> beta);
  static ExitPolicy entropy(double beta);
  static ExitPolicy max_confidence(double beta);
  static ExitPolicy learned_gate(double cutoff = 0.5);
  static ExitPolicy always_final();
  static ExitPolicy fixed(int ordinal);

  double threshold_for(int ordinal) const;

  // Entropy policies evaluate every head on the way down; so do
  // max-confidence and gate policies. Targeted policies consult only
  // their own head.
  bool cascades() const { return kind != PolicyKind::AlwaysFinal && kind != PolicyKind::FixedExit; }
};

// Stop decision at one exit. `prediction` is the head output, `gate_value`
// is consulted only by learned-gate policies.
bool decide_exit(const ExitPolicy& policy, int ordinal, std::span<const double> prediction,
                 double gate_value, int class_count);

}  // namespace multiexit::inferkit
