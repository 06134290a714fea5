#include "multiexit/exitnet/network.hpp"

#include <algorithm>

#include "multiexit/common/errors.hpp"
#include "multiexit/numcore/kernels.hpp"

namespace multiexit::exitnet {

using numcore::BlockKind;
using numcore::Tensor;

namespace {

std::vector<Block> make_head_layers(int embed_dim, const HeadSpec& spec, int class_count,
                                    std::mt19937_64& rng) {
  std::vector<Block> layers;
  int d = embed_dim;
  if (spec.average_pool_to > 0) {
    if (embed_dim % spec.average_pool_to != 0) {
      throw PlacementError("head pooling width must divide the embedding dimension");
    }
    d = spec.average_pool_to;
  }
  if (spec.hidden_dim > 0) {
    layers.push_back(Block::dense(d, spec.hidden_dim, rng));
    layers.push_back(Block::relu(spec.hidden_dim));
    d = spec.hidden_dim;
  }
  layers.push_back(Block::dense(d, class_count, rng));
  layers.push_back(Block::softmax_output(class_count));
  return layers;
}

// Plain mean over contiguous column groups, eval-path twin of
// ops::avg_pool_cols.
std::vector<double> pool_rows(const std::vector<double>& x, int rows, int cols, int groups) {
  const int width = cols / groups;
  const double inv = 1.0 / width;
  std::vector<double> out(static_cast<std::size_t>(rows) * groups);
  for (int r = 0; r < rows; ++r) {
    for (int g = 0; g < groups; ++g) {
      double s = 0.0;
      for (int k = 0; k < width; ++k) s += x[static_cast<std::size_t>(r) * cols + g * width + k];
      out[static_cast<std::size_t>(r) * groups + g] = s * inv;
    }
  }
  return out;
}

}  // namespace

MultiExitNetwork::MultiExitNetwork(std::vector<Block> backbone, int class_count)
    : backbone_(std::move(backbone)), class_count_(class_count) {
  validate();
}

void MultiExitNetwork::validate() const {
  if (backbone_.empty()) throw PlacementError("backbone must contain at least one block");
  if (class_count_ < 2) throw ContractError("class count must be at least 2");
  for (std::size_t i = 1; i < backbone_.size(); ++i) {
    if (backbone_[i].in_dim != backbone_[i - 1].out_dim) {
      throw DimensionError("backbone block " + std::to_string(i + 1) +
                           " input does not match previous output");
    }
  }
  const Block& last = backbone_.back();
  if (last.kind != BlockKind::SoftmaxOutput || last.out_dim != class_count_) {
    throw PlacementError("final backbone block must be softmax-output over the classes");
  }
}

MultiExitNetwork MultiExitNetwork::attach_exits(std::vector<Block> backbone,
                                                const std::vector<int>& placement,
                                                const HeadSpec& spec, int class_count,
                                                std::mt19937_64& rng) {
  MultiExitNetwork net(std::move(backbone), class_count);
  const int depth = net.depth();
  int prev = 0;
  for (int idx : placement) {
    if (idx < 1 || idx >= depth) {
      throw PlacementError("exit index " + std::to_string(idx) + " outside [1, " +
                           std::to_string(depth - 1) + "]");
    }
    if (idx <= prev) {
      throw PlacementError("exit indices must be strictly increasing (got " +
                           std::to_string(idx) + " after " + std::to_string(prev) + ")");
    }
    prev = idx;
    AuxiliaryHead head;
    head.attach_index = idx;
    head.pool_to = spec.average_pool_to;
    head.layers = make_head_layers(net.backbone_[idx - 1].out_dim, spec, class_count, rng);
    net.exits_.push_back(std::move(head));
  }
  return net;
}

MultiExitNetwork MultiExitNetwork::detach_exits() const {
  return MultiExitNetwork(backbone_, class_count_);
}

void MultiExitNetwork::add_gates(std::mt19937_64& rng) {
  gates_.clear();
  for (const auto& head : exits_) {
    ExitGate gate;
    gate.attach_index = head.attach_index;
    const int embed = backbone_[head.attach_index - 1].out_dim;
    gate.lin = Block::dense(class_count_ + embed, 1, rng);
    gates_.push_back(std::move(gate));
  }
}

int MultiExitNetwork::input_dim() const { return backbone_.front().in_dim; }

int MultiExitNetwork::attach_index(int ordinal) const {
  if (ordinal < 0 || ordinal >= exit_count()) throw IndexError("exit ordinal out of range");
  return exits_[ordinal].attach_index;
}

int MultiExitNetwork::embedding_dim(int ordinal) const {
  return backbone_[attach_index(ordinal) - 1].out_dim;
}

TensorPtr MultiExitNetwork::forward_backbone_range(const TensorPtr& x, int first_block,
                                                   int last_block) const {
  if (first_block < 1 || last_block > depth() || first_block > last_block + 1) {
    throw IndexError("backbone range out of bounds");
  }
  TensorPtr h = x;
  for (int i = first_block; i <= last_block; ++i) {
    h = numcore::forward_block(backbone_[i - 1], h);
  }
  return h;
}

std::pair<TensorPtr, TensorPtr> MultiExitNetwork::forward_head(int ordinal,
                                                               const TensorPtr& embedding) const {
  const auto& head = exits_.at(ordinal);
  TensorPtr h = embedding;
  if (head.pool_to > 0) h = numcore::ops::avg_pool_cols(h, head.pool_to);
  TensorPtr logits;
  for (const auto& layer : head.layers) {
    if (layer.kind == BlockKind::SoftmaxOutput) logits = h;
    h = numcore::forward_block(layer, h);
  }
  return {logits, h};
}

TensorPtr MultiExitNetwork::forward_gate(int ordinal, const TensorPtr& head_logits,
                                         const TensorPtr& embedding) const {
  const auto& gate = gates_.at(ordinal);
  auto joined = numcore::ops::concat_cols(head_logits, embedding);
  return numcore::ops::sigmoid(numcore::forward_block(gate.lin, joined));
}

ExitTrace MultiExitNetwork::forward_all_exits(const TensorPtr& x, bool with_gates) const {
  ExitTrace trace;
  TensorPtr h = x;
  std::size_t next_exit = 0;
  for (int i = 1; i <= depth(); ++i) {
    try {
      h = numcore::forward_block(backbone_[i - 1], h);
    } catch (const DimensionError& e) {
      throw DimensionError("backbone block " + std::to_string(i) + ": " + e.what());
    }
    ++trace.blocks_evaluated;
    while (next_exit < exits_.size() && exits_[next_exit].attach_index == i) {
      trace.embeddings.push_back(h);
      try {
        auto [logits, probs] = forward_head(static_cast<int>(next_exit), h);
        trace.head_logits.push_back(logits);
        trace.predictions.push_back(probs);
        if (with_gates && has_gates()) {
          trace.gate_values.push_back(forward_gate(static_cast<int>(next_exit), logits, h));
        }
      } catch (const DimensionError& e) {
        throw DimensionError("exit at block " + std::to_string(i) + ": " + e.what());
      }
      ++next_exit;
    }
  }
  trace.final_prediction = h;
  return trace;
}

std::vector<double> MultiExitNetwork::eval_backbone_range(const std::vector<double>& rows_data,
                                                          int rows, int first_block,
                                                          int last_block) const {
  if (first_block < 1 || last_block > depth() || first_block > last_block + 1) {
    throw IndexError("backbone range out of bounds");
  }
  std::vector<double> h = rows_data;
  for (int i = first_block; i <= last_block; ++i) {
    h = backbone_[i - 1].eval(h, rows);
  }
  return h;
}

std::vector<double> MultiExitNetwork::eval_head_logits(int ordinal,
                                                       const std::vector<double>& embedding_rows,
                                                       int rows) const {
  const auto& head = exits_.at(ordinal);
  std::vector<double> h = embedding_rows;
  if (head.pool_to > 0) {
    h = pool_rows(h, rows, static_cast<int>(h.size()) / rows, head.pool_to);
  }
  for (const auto& layer : head.layers) {
    if (layer.kind == BlockKind::SoftmaxOutput) break;
    h = layer.eval(h, rows);
  }
  return h;
}

std::vector<double> MultiExitNetwork::eval_head(int ordinal,
                                                const std::vector<double>& embedding_rows,
                                                int rows) const {
  auto logits = eval_head_logits(ordinal, embedding_rows, rows);
  const auto& softmax = exits_.at(ordinal).layers.back();
  return softmax.eval(logits, rows);
}

double MultiExitNetwork::eval_gate(int ordinal, std::span<const double> head_logits,
                                   std::span<const double> embedding) const {
  const auto& gate = gates_.at(ordinal);
  std::vector<double> joined;
  joined.reserve(head_logits.size() + embedding.size());
  joined.insert(joined.end(), head_logits.begin(), head_logits.end());
  joined.insert(joined.end(), embedding.begin(), embedding.end());
  const auto lin = gate.lin.eval(joined, 1);
  double g;
  numcore::kernels::sigmoid(lin.data(), 1, &g);
  return g;
}

SampleTrace MultiExitNetwork::eval_all_exits(std::span<const double> x, bool with_gates) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw DimensionError("sample has " + std::to_string(x.size()) + " features, expected " +
                         std::to_string(input_dim()));
  }
  SampleTrace trace;
  std::vector<double> h(x.begin(), x.end());
  std::size_t next_exit = 0;
  for (int i = 1; i <= depth(); ++i) {
    h = backbone_[i - 1].eval(h, 1);
    ++trace.blocks_evaluated;
    while (next_exit < exits_.size() && exits_[next_exit].attach_index == i) {
      trace.embeddings.push_back(h);
      auto logits = eval_head_logits(static_cast<int>(next_exit), h, 1);
      trace.predictions.push_back(exits_[next_exit].layers.back().eval(logits, 1));
      if (with_gates && has_gates()) {
        trace.gate_values.push_back(eval_gate(static_cast<int>(next_exit), logits, h));
      }
      ++next_exit;
    }
  }
  trace.final_prediction = h;
  return trace;
}

MultiExitNetwork::UntilResult MultiExitNetwork::eval_until(std::span<const double> x,
                                                           int stop_ordinal) const {
  if (stop_ordinal < 0 || stop_ordinal > exit_count()) {
    throw ContractError("unknown exit ordinal " + std::to_string(stop_ordinal));
  }
  if (static_cast<int>(x.size()) != input_dim()) {
    throw DimensionError("sample feature count mismatch");
  }
  UntilResult res;
  std::vector<double> h(x.begin(), x.end());
  const int last_block = stop_ordinal == exit_count() ? depth() : exits_[stop_ordinal].attach_index;
  for (int i = 1; i <= last_block; ++i) {
    h = backbone_[i - 1].eval(h, 1);
    ++res.blocks_evaluated;
  }
  if (stop_ordinal == exit_count()) {
    res.prediction = std::move(h);
  } else {
    res.prediction = eval_head(stop_ordinal, h, 1);
  }
  return res;
}

numcore::NamedParams MultiExitNetwork::named_params() const {
  numcore::NamedParams out;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    auto named = backbone_[i].named_params("backbone." + std::to_string(i));
    out.insert(out.end(), named.begin(), named.end());
  }
  for (const auto& head : exits_) {
    for (std::size_t j = 0; j < head.layers.size(); ++j) {
      auto named = head.layers[j].named_params("exit." + std::to_string(head.attach_index) +
                                               ".layer." + std::to_string(j));
      out.insert(out.end(), named.begin(), named.end());
    }
  }
  for (const auto& gate : gates_) {
    auto named = gate.lin.named_params("gate." + std::to_string(gate.attach_index));
    out.insert(out.end(), named.begin(), named.end());
  }
  return out;
}

MultiExitNetwork MultiExitNetwork::clone() const {
  std::vector<Block> backbone;
  backbone.reserve(backbone_.size());
  for (const auto& b : backbone_) backbone.push_back(b.clone());
  MultiExitNetwork net(std::move(backbone), class_count_);
  for (const auto& head : exits_) {
    AuxiliaryHead copy;
    copy.attach_index = head.attach_index;
    copy.pool_to = head.pool_to;
    for (const auto& layer : head.layers) copy.layers.push_back(layer.clone());
    net.exits_.push_back(std::move(copy));
  }
  for (const auto& gate : gates_) {
    ExitGate copy;
    copy.attach_index = gate.attach_index;
    copy.lin = gate.lin.clone();
    net.gates_.push_back(std::move(copy));
  }
  return net;
}

std::vector<Block> make_dense_backbone(int input_dim, const std::vector<int>& hidden_dims,
                                       int class_count, std::mt19937_64& rng) {
  std::vector<Block> blocks;
  int d = input_dim;
  for (int h : hidden_dims) {
    blocks.push_back(Block::dense(d, h, rng));
    blocks.push_back(Block::relu(h));
    d = h;
  }
  blocks.push_back(Block::dense(d, class_count, rng));
  blocks.push_back(Block::softmax_output(class_count));
  return blocks;
}

}  // namespace multiexit::exitnet
