#include "multiexit/numcore/block.hpp"

#include <cmath>

#include "multiexit/numcore/kernels.hpp"

namespace multiexit::numcore {

std::string block_kind_name(BlockKind kind) {
  switch (kind) {
    case BlockKind::Dense: return "dense";
    case BlockKind::Relu: return "relu";
    case BlockKind::SoftmaxOutput: return "softmax-output";
    case BlockKind::Identity: return "identity";
  }
  return "?";
}

BlockKind block_kind_from_name(const std::string& name) {
  if (name == "dense") return BlockKind::Dense;
  if (name == "relu") return BlockKind::Relu;
  if (name == "softmax-output") return BlockKind::SoftmaxOutput;
  if (name == "identity") return BlockKind::Identity;
  throw ParseError("unknown block kind: " + name);
}

Block Block::dense(int in_dim, int out_dim, std::mt19937_64& rng) {
  if (in_dim <= 0 || out_dim <= 0) throw DimensionError("dense dims must be positive");
  Block b;
  b.kind = BlockKind::Dense;
  b.in_dim = in_dim;
  b.out_dim = out_dim;
  const double limit = std::sqrt(6.0 / (in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(static_cast<std::size_t>(in_dim) * out_dim);
  for (auto& v : w) v = dist(rng);
  b.weight = Tensor::make({in_dim, out_dim}, std::move(w), true);
  b.bias = Tensor::zeros({out_dim}, true);
  return b;
}

Block Block::relu(int dim) {
  Block b;
  b.kind = BlockKind::Relu;
  b.in_dim = b.out_dim = dim;
  return b;
}

Block Block::softmax_output(int dim) {
  Block b;
  b.kind = BlockKind::SoftmaxOutput;
  b.in_dim = b.out_dim = dim;
  return b;
}

Block Block::identity(int dim) {
  Block b;
  b.kind = BlockKind::Identity;
  b.in_dim = b.out_dim = dim;
  return b;
}

std::vector<std::pair<std::string, TensorPtr>> Block::named_params(const std::string& prefix) const {
  if (kind != BlockKind::Dense) return {};
  return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

double Block::mac_cost() const {
  switch (kind) {
    case BlockKind::Dense: return static_cast<double>(in_dim) * out_dim;
    case BlockKind::Relu:
    case BlockKind::SoftmaxOutput: return static_cast<double>(out_dim);
    case BlockKind::Identity: return 0.0;
  }
  return 0.0;
}

void Block::eval(const double* x, double* y, int rows) const {
  switch (kind) {
    case BlockKind::Dense:
      kernels::dense(x, rows, in_dim, out_dim, weight->data().data(), bias->data().data(), y);
      return;
    case BlockKind::Relu:
      kernels::relu(x, static_cast<std::size_t>(rows) * out_dim, y);
      return;
    case BlockKind::SoftmaxOutput:
      kernels::softmax(x, rows, out_dim, y);
      return;
    case BlockKind::Identity:
      for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * out_dim; ++i) y[i] = x[i];
      return;
  }
}

std::vector<double> Block::eval(const std::vector<double>& x, int rows) const {
  if (x.size() != static_cast<std::size_t>(rows) * in_dim) {
    throw DimensionError("block '" + block_kind_name(kind) + "' input size mismatch");
  }
  std::vector<double> y(static_cast<std::size_t>(rows) * out_dim);
  eval(x.data(), y.data(), rows);
  return y;
}

Block Block::clone() const {
  Block b = *this;
  if (weight) b.weight = Tensor::make(weight->shape(), weight->data(), weight->requires_grad());
  if (bias) b.bias = Tensor::make(bias->shape(), bias->data(), bias->requires_grad());
  return b;
}

TensorPtr forward_block(const Block& block, const TensorPtr& input) {
  if (input->cols() != block.in_dim) {
    throw DimensionError("block '" + block_kind_name(block.kind) + "' expects inputs with " +
                         std::to_string(block.in_dim) + " columns, got " +
                         std::to_string(input->cols()));
  }
  switch (block.kind) {
    case BlockKind::Dense: return ops::dense(input, block.weight, block.bias);
    case BlockKind::Relu: return ops::relu(input);
    case BlockKind::SoftmaxOutput: return ops::softmax_rows(input);
    case BlockKind::Identity: return ops::identity(input);
  }
  throw ContractError("unhandled block kind");
}

}  // namespace multiexit::numcore
