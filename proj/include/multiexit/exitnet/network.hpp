#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "multiexit/numcore/block.hpp"
#include "multiexit/numcore/checkpoint.hpp"
#include "multiexit/numcore/tensor.hpp"

namespace multiexit::exitnet {

using numcore::Block;
using numcore::TensorPtr;

// Auxiliary classifier layout. hidden_dim == 0 gives a single dense layer
// into the softmax; > 0 inserts dense+relu of that width first.
// average_pool_to > 0 prepends a fixed mean-pool reduction for wide
// embeddings before the dense stack.
struct HeadSpec {
  int hidden_dim = 0;
  int average_pool_to = 0;
};

struct AuxiliaryHead {
  int attach_index = 0;            // exit sits after backbone block [1..L-1]
  std::vector<Block> layers;       // ends in softmax-output with class_count outputs
  int pool_to = 0;                 // optional mean-pool width before layers (0 = off)
};

// Confidence gate: scalar sigmoid readout over [head logits, embedding].
struct ExitGate {
  int attach_index = 0;
  Block lin;                       // dense(class_count + embed_dim -> 1)
};

// Batch forward record (graph mode). Entry k corresponds to the k-th exit
// in attach order; the final backbone prediction is kept separately.
struct ExitTrace {
  std::vector<TensorPtr> embeddings;
  std::vector<TensorPtr> head_logits;
  std::vector<TensorPtr> predictions;
  TensorPtr final_prediction;
  std::vector<TensorPtr> gate_values;  // [N,1] per exit; empty when gates absent
  int blocks_evaluated = 0;
};

// Single-sample forward record (no-graph eval mode).
struct SampleTrace {
  std::vector<std::vector<double>> embeddings;
  std::vector<std::vector<double>> predictions;
  std::vector<double> final_prediction;
  std::vector<double> gate_values;
  int blocks_evaluated = 0;
  int chosen_exit = -1;  // ordinal in [0, exit_count()]; exit_count() means final
};

class MultiExitNetwork {
 public:
  MultiExitNetwork() = default;
  MultiExitNetwork(std::vector<Block> backbone, int class_count);

  MultiExitNetwork(const MultiExitNetwork&) = delete;
  MultiExitNetwork& operator=(const MultiExitNetwork&) = delete;
  MultiExitNetwork(MultiExitNetwork&&) = default;
  MultiExitNetwork& operator=(MultiExitNetwork&&) = default;

  // Fresh heads at the given attach indices (strictly increasing, < L);
  // backbone parameter tensors are adopted unchanged.
  static MultiExitNetwork attach_exits(std::vector<Block> backbone,
                                       const std::vector<int>& placement, const HeadSpec& spec,
                                       int class_count, std::mt19937_64& rng);

  // Backbone-only view sharing the same parameter tensors.
  MultiExitNetwork detach_exits() const;

  void add_gates(std::mt19937_64& rng);

  int depth() const { return static_cast<int>(backbone_.size()); }
  int class_count() const { return class_count_; }
  int input_dim() const;
  int exit_count() const { return static_cast<int>(exits_.size()); }
  bool has_gates() const { return !gates_.empty(); }

  const std::vector<Block>& backbone() const { return backbone_; }
  std::vector<Block>& backbone() { return backbone_; }
  const std::vector<AuxiliaryHead>& exits() const { return exits_; }
  std::vector<AuxiliaryHead>& exits() { return exits_; }
  const std::vector<ExitGate>& gates() const { return gates_; }
  std::vector<ExitGate>& gates() { return gates_; }

  int attach_index(int ordinal) const;
  int embedding_dim(int ordinal) const;  // out_dim of the attach block

  // --- graph mode ---
  ExitTrace forward_all_exits(const TensorPtr& x, bool with_gates = true) const;
  TensorPtr forward_backbone_range(const TensorPtr& x, int first_block, int last_block) const;
  // Returns {logits, probabilities}.
  std::pair<TensorPtr, TensorPtr> forward_head(int ordinal, const TensorPtr& embedding) const;
  TensorPtr forward_gate(int ordinal, const TensorPtr& head_logits, const TensorPtr& embedding) const;

  // --- eval mode (no graph) ---
  SampleTrace eval_all_exits(std::span<const double> x, bool with_gates = true) const;

  struct UntilResult {
    std::vector<double> prediction;
    int blocks_evaluated = 0;
  };
  // stop ordinal in [0, exit_count()]; exit_count() runs the full backbone.
  UntilResult eval_until(std::span<const double> x, int stop_ordinal) const;

  std::vector<double> eval_backbone_range(const std::vector<double>& rows_data, int rows,
                                          int first_block, int last_block) const;
  std::vector<double> eval_head(int ordinal, const std::vector<double>& embedding_rows,
                                int rows) const;
  std::vector<double> eval_head_logits(int ordinal, const std::vector<double>& embedding_rows,
                                       int rows) const;
  double eval_gate(int ordinal, std::span<const double> head_logits,
                   std::span<const double> embedding) const;

  numcore::NamedParams named_params() const;
  MultiExitNetwork clone() const;

 private:
  void validate() const;

  std::vector<Block> backbone_;
  std::vector<AuxiliaryHead> exits_;
  std::vector<ExitGate> gates_;
  int class_count_ = 0;
};

// Builds the standard dense backbone used across the toolkit:
// dense(input,h1) relu dense(h1,h2) relu ... dense(hk,classes) softmax.
std::vector<Block> make_dense_backbone(int input_dim, const std::vector<int>& hidden_dims,
                                       int class_count, std::mt19937_64& rng);

}  // namespace multiexit::exitnet
