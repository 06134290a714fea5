#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "multiexit/common/errors.hpp"

namespace multiexit::numcore {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major 64-bit float array with an optional gradient buffer and
// reverse-mode linkage. Ops record result -> input edges; ComputeGraph
// replays them in reverse topological order. Gradients accumulate
// additively wherever a value fans out.
class Tensor : public std::enable_shared_from_this<Tensor> {
 public:
  using BackwardFn = std::function<void(Tensor&)>;

  Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

  static TensorPtr make(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<int> shape, double value, bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Row/column view used by the 2-D kernels: rank-0 and rank-1 tensors act
  // as a single row.
  int rows() const;
  int cols() const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }
  bool has_grad() const { return !grad_.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();
  void drop_grad() { grad_.clear(); }
  void accumulate_grad(const std::vector<double>& g);

  bool all_finite() const;

  void set_parents(std::vector<TensorPtr> parents, BackwardFn fn);
  const std::vector<TensorPtr>& parents() const { return parents_; }
  bool is_leaf() const { return parents_.empty(); }
  void run_backward_fn();

  // Deep copy of shape+data; no graph linkage, no grad.
  TensorPtr detached_copy() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
  std::vector<TensorPtr> parents_;
  BackwardFn backward_fn_;
};

// Topologically ordered record of the executed operations reachable from a
// root node (parents first).
class ComputeGraph {
 public:
  static ComputeGraph from(const TensorPtr& root);
  // Runs every backward closure in exact reverse topological order. The
  // root's grad must be seeded before calling.
  void propagate();
  std::size_t node_count() const { return topo_.size(); }

 private:
  std::vector<TensorPtr> topo_;
};

// Backward pass from a scalar loss; seeds d(loss)/d(loss) = 1.
void backward(const TensorPtr& loss);

// Backward pass from an arbitrary node with an explicit seed gradient
// (same length as the node's data). Used by stage-local training rules
// that substitute their own upstream error signal.
void backward_seeded(const TensorPtr& node, const std::vector<double>& seed_grad);

std::vector<int> product_checked(const std::vector<int>& shape, std::size_t data_len);

}  // namespace multiexit::numcore
