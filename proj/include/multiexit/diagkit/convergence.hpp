#pragma once

#include <functional>
#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/exitnet/network.hpp"
#include "multiexit/trainkit/train.hpp"

namespace multiexit::diagkit {

// Paired convergence measurement: every strategy starts from the exact
// same initialization (fingerprint-checked) and consumes the same batch
// order, so per-seed iteration counts are directly comparable. The label
// "standard" trains the final loss alone (all companion weights zero).
struct ConvergenceRecord {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<double> loss_per_iteration;  // full-train final-exit loss after each step
  long iterations_to_target = 0;           // total steps + 1 when never reached
  std::uint64_t init_fingerprint = 0;
};

using NetFactory = std::function<exitnet::MultiExitNetwork(std::uint64_t seed)>;

std::vector<ConvergenceRecord> convergence_compare(const NetFactory& make_net, const Dataset& data,
                                                   const std::vector<std::string>& strategies,
                                                   double target_loss,
                                                   const std::vector<std::uint64_t>& seeds,
                                                   const trainkit::TrainingConfig& base_cfg);

// Full-train loss of the final exit only (eval mode).
double final_exit_loss(const exitnet::MultiExitNetwork& net, const Dataset& data);

// CSV columns: strategy, seed, iteration, loss.
void save_convergence_csv(const std::vector<ConvergenceRecord>& records, const std::string& path);

}  // namespace multiexit::diagkit
