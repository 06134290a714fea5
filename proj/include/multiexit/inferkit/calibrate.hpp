#pragma once

#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/exitnet/network.hpp"

namespace multiexit::inferkit {

// Cached per-sample cascade quantities so threshold sweeps do not re-run
// the network: entropy and correctness at every exit plus the final exit.
struct CascadeCache {
  int exit_count = 0;
  std::vector<double> entropy;      // sample-major, exit_count per sample
  std::vector<char> exit_correct;   // sample-major, exit_count per sample
  std::vector<char> final_correct;  // per sample

  std::size_t size() const { return final_correct.size(); }
  double entropy_at(std::size_t sample, int ordinal) const {
    return entropy[sample * exit_count + ordinal];
  }
  bool correct_at(std::size_t sample, int ordinal) const {
    return exit_correct[sample * exit_count + ordinal] != 0;
  }

  // Accuracy of entropy-threshold inference with one shared threshold.
  double shared_threshold_accuracy(double beta) const;
};

CascadeCache build_cascade_cache(const exitnet::MultiExitNetwork& net, const Dataset& data);

// Largest per-exit entropy threshold whose stopping set keeps accuracy
// within `budget` of the final exit's accuracy on the same samples,
// searched over the grid {0.00, 0.01, ..., 1.00} independently per exit.
std::vector<double> calibrate_thresholds_per_exit(const exitnet::MultiExitNetwork& net,
                                                  const Dataset& validation, double budget);
std::vector<double> calibrate_thresholds_per_exit(const CascadeCache& cache, double budget);

struct SingleThresholdResult {
  bool feasible = false;
  bool converged = false;
  double beta = 0.0;
  double achieved_accuracy = 0.0;
  long iterations = 0;
  struct LogEntry {
    long iteration;
    double beta;
    double accuracy;
  };
  std::vector<LogEntry> log;
};

// Proportional-error tuning of one shared threshold:
//   beta <- clip(beta + mu * (acc(beta) - target), 0, 1)
// stopping at the first beta whose accuracy is within one point of the
// target; otherwise the best visited beta is reported. Targets above the
// final-exit accuracy come back marked infeasible.
SingleThresholdResult calibrate_single_threshold(const exitnet::MultiExitNetwork& net,
                                                 const Dataset& validation, double target_accuracy,
                                                 double mu = 1.0, long max_iters = 200);
SingleThresholdResult calibrate_single_threshold(const CascadeCache& cache,
                                                 double target_accuracy, double mu = 1.0,
                                                 long max_iters = 200);

void save_calibration_json(const std::string& path, const std::vector<double>& per_exit_beta,
                           const SingleThresholdResult* single = nullptr);

}  // namespace multiexit::inferkit
