#pragma once

#include <functional>
#include <string>
#include <vector>

#include "multiexit/numcore/tensor.hpp"

namespace multiexit::numcore {

// One learning-rate domain. A schedule, when set, overrides the flat rate
// and receives the 0-based step counter.
struct ParamGroup {
  std::string name;
  std::vector<TensorPtr> params;
  double lr = 0.0;
  std::function<double(long)> schedule;
};

// Plain SGD over named parameter groups. A group whose rate evaluates to
// zero is skipped outright, which keeps its parameters bit-identical; that
// is the freezing contract the training strategies rely on.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(std::vector<ParamGroup> groups);

  void zero_grad();
  void step();
  long step_count() const { return t_; }

  ParamGroup& group(const std::string& name);
  std::vector<ParamGroup>& groups() { return groups_; }

 private:
  std::vector<ParamGroup> groups_;
  long t_ = 0;
};

}  // namespace multiexit::numcore
