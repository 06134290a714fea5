#include "multiexit/numcore/optimizer.hpp"

namespace multiexit::numcore {

SgdOptimizer::SgdOptimizer(std::vector<ParamGroup> groups) : groups_(std::move(groups)) {}

void SgdOptimizer::zero_grad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) p->zero_grad();
  }
}

void SgdOptimizer::step() {
  for (auto& g : groups_) {
    const double lr = g.schedule ? g.schedule(t_) : g.lr;
    if (lr < 0.0) throw ContractError("negative learning rate in group '" + g.name + "'");
    if (lr == 0.0) continue;
    for (auto& p : g.params) {
      if (!p->has_grad()) {
        throw ContractError("missing gradient for a parameter in group '" + g.name + "'");
      }
      auto& theta = p->data();
      const auto& grad = p->grad();
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
    }
  }
  ++t_;
}

ParamGroup& SgdOptimizer::group(const std::string& name) {
  for (auto& g : groups_) {
    if (g.name == name) return g;
  }
  throw IndexError("no parameter group named '" + name + "'");
}

}  // namespace multiexit::numcore
