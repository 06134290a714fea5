#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "multiexit/numcore/ops.hpp"
#include "multiexit/numcore/tensor.hpp"

namespace multiexit::numcore {

enum class BlockKind { Dense, Relu, SoftmaxOutput, Identity };

std::string block_kind_name(BlockKind kind);
BlockKind block_kind_from_name(const std::string& name);

// One backbone/head building unit. Dense carries weight [in,out] and bias
// [out]; the parameter-free kinds carry nothing.
struct Block {
  BlockKind kind = BlockKind::Identity;
  int in_dim = 0;
  int out_dim = 0;
  TensorPtr weight;
  TensorPtr bias;

  // Weights drawn uniform in +/- sqrt(6/(in+out)), bias zero.
  static Block dense(int in_dim, int out_dim, std::mt19937_64& rng);
  static Block relu(int dim);
  static Block softmax_output(int dim);
  static Block identity(int dim);

  bool has_params() const { return kind == BlockKind::Dense; }
  std::vector<std::pair<std::string, TensorPtr>> named_params(const std::string& prefix) const;

  // Per-row operation count: dense in*out multiply-accumulates, activations
  // one per output value, identity free.
  double mac_cost() const;

  // No-graph forward over `rows` contiguous row-major rows.
  void eval(const double* x, double* y, int rows) const;
  std::vector<double> eval(const std::vector<double>& x, int rows) const;

  // Deep copy (fresh parameter tensors).
  Block clone() const;
};

// Graph-recording forward with shape checks; errors name the block kind.
TensorPtr forward_block(const Block& block, const TensorPtr& input);

}  // namespace multiexit::numcore
