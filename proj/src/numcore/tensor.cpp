#include "multiexit/numcore/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace multiexit::numcore {

namespace {
std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

std::vector<int> product_checked(const std::vector<int>& shape, std::size_t data_len) {
  if (shape_product(shape) != data_len) {
    throw DimensionError("tensor shape does not match data length");
  }
  return shape;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad)
    : shape_(product_checked(shape, data.size())),
      data_(std::move(data)),
      requires_grad_(requires_grad) {}

TensorPtr Tensor::make(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const auto n = shape_product(shape);
  return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  const auto n = shape_product(shape);
  return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, value), requires_grad);
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return std::make_shared<Tensor>(std::vector<int>{}, std::vector<double>{value}, requires_grad);
}

int Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  return 1;
}

int Tensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() requires a single-element tensor");
  return data_[0];
}

std::vector<double>& Tensor::grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

const std::vector<double>& Tensor::grad() const {
  if (grad_.empty()) throw ContractError("gradient not populated");
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

void Tensor::accumulate_grad(const std::vector<double>& g) {
  if (g.size() != data_.size()) throw DimensionError("gradient size mismatch");
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::set_parents(std::vector<TensorPtr> parents, BackwardFn fn) {
  parents_ = std::move(parents);
  backward_fn_ = std::move(fn);
  for (const auto& p : parents_) {
    if (p->requires_grad()) {
      requires_grad_ = true;
      break;
    }
  }
}

void Tensor::run_backward_fn() {
  if (backward_fn_) backward_fn_(*this);
}

TensorPtr Tensor::detached_copy() const { return Tensor::make(shape_, data_, false); }

ComputeGraph ComputeGraph::from(const TensorPtr& root) {
  ComputeGraph g;
  std::unordered_set<const Tensor*> visited;
  // Iterative DFS; parents are emitted before the nodes that consume them.
  struct Frame {
    TensorPtr node;
    std::size_t next_parent = 0;
  };
  std::vector<Frame> stack;
  if (root) stack.push_back({root, 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& parents = top.node->parents();
    if (top.next_parent < parents.size()) {
      const TensorPtr& p = parents[top.next_parent++];
      if (visited.insert(p.get()).second) {
        stack.push_back({p, 0});
      }
    } else {
      g.topo_.push_back(top.node);
      stack.pop_back();
    }
  }
  return g;
}

void ComputeGraph::propagate() {
  for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
    if ((*it)->requires_grad()) {
      (*it)->run_backward_fn();
    }
  }
}

void backward(const TensorPtr& loss) {
  if (!loss) throw ContractError("backward on null tensor");
  if (loss->size() != 1) throw ContractError("backward requires a scalar loss");
  backward_seeded(loss, {1.0});
}

void backward_seeded(const TensorPtr& node, const std::vector<double>& seed_grad) {
  if (!node) throw ContractError("backward on null tensor");
  if (seed_grad.size() != node->size()) throw DimensionError("seed gradient size mismatch");
  auto graph = ComputeGraph::from(node);
  node->accumulate_grad(seed_grad);
  graph.propagate();
}

}  // namespace multiexit::numcore
