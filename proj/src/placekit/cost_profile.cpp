#include "multiexit/placekit/cost_profile.hpp"

#include "multiexit/common/csv.hpp"

namespace multiexit::placekit {

double CostProfile::cumulative(int i) const {
  if (i < 0 || i > depth()) throw IndexError("cumulative cost index out of range");
  double s = 0.0;
  for (int k = 0; k < i; ++k) s += block_cost[k];
  return s;
}

double CostProfile::compression_ratio(int i) const {
  if (i < 1 || i >= depth()) throw IndexError("compression ratio needs 1 <= i < L");
  const double reach = reach_fraction[i - 1];
  if (reach <= 0.0) return 1.0;
  return reach_fraction[i] / reach;
}

void CostProfile::validate() const {
  if (block_cost.empty()) throw ContractError("empty cost profile");
  if (head_cost.size() != block_cost.size() || reach_fraction.size() != block_cost.size()) {
    throw ContractError("cost profile arrays must share one length");
  }
  for (double g : block_cost) {
    if (g < 0.0) throw ContractError("negative block cost");
  }
  if (reach_fraction[0] != 1.0) throw ContractError("reach fraction must start at 1");
  for (std::size_t i = 1; i < reach_fraction.size(); ++i) {
    if (reach_fraction[i] > reach_fraction[i - 1] + 1e-12) {
      throw ContractError("reach fractions must be nonincreasing");
    }
  }
}

double head_cost_for(int embed_dim, int class_count, const exitnet::HeadSpec& spec) {
  double cost = 0.0;
  int d = embed_dim;
  if (spec.average_pool_to > 0) {
    cost += embed_dim;  // one pass over the embedding
    d = spec.average_pool_to;
  }
  if (spec.hidden_dim > 0) {
    cost += static_cast<double>(d) * spec.hidden_dim + spec.hidden_dim;
    d = spec.hidden_dim;
  }
  cost += static_cast<double>(d) * class_count + class_count;
  return cost;
}

CostProfile static_cost_profile(const exitnet::MultiExitNetwork& net,
                                const exitnet::HeadSpec& candidate_head) {
  CostProfile p;
  const auto& blocks = net.backbone();
  p.block_cost.reserve(blocks.size());
  for (const auto& b : blocks) p.block_cost.push_back(b.mac_cost());
  p.head_cost.assign(blocks.size(), 0.0);
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    p.head_cost[i] = head_cost_for(blocks[i].out_dim, net.class_count(), candidate_head);
  }
  p.reach_fraction.assign(blocks.size(), 1.0);
  return p;
}

CostProfile scaled_profile(const CostProfile& profile,
                           const std::vector<double>& block_multipliers) {
  if (block_multipliers.size() != profile.block_cost.size()) {
    throw ContractError("need one multiplier per block");
  }
  CostProfile out = profile;
  for (std::size_t i = 0; i < out.block_cost.size(); ++i) {
    if (block_multipliers[i] <= 0.0) throw ContractError("multipliers must be positive");
    out.block_cost[i] *= block_multipliers[i];
  }
  return out;
}

void save_profile_csv(const CostProfile& profile, const std::string& path) {
  CsvWriter w(path, {"index", "gamma_f", "gamma_c", "I"});
  for (int i = 0; i < profile.depth(); ++i) {
    w.row({std::to_string(i + 1), fmt_double(profile.block_cost[i]),
           fmt_double(profile.head_cost[i]), fmt_double(profile.reach_fraction[i])});
  }
}

CostProfile load_profile_csv(const std::string& path) {
  const auto table = read_csv(path);
  if (table.header != std::vector<std::string>{"index", "gamma_f", "gamma_c", "I"}) {
    throw ParseError("profile CSV must have columns index,gamma_f,gamma_c,I");
  }
  CostProfile p;
  for (const auto& row : table.rows) {
    if (row.size() != 4) throw ParseError("profile CSV row width");
    p.block_cost.push_back(std::stod(row[1]));
    p.head_cost.push_back(std::stod(row[2]));
    p.reach_fraction.push_back(std::stod(row[3]));
  }
  p.validate();
  return p;
}

}  // namespace multiexit::placekit
