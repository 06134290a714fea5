#include "multiexit/inferkit/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "multiexit/inferkit/policy.hpp"

namespace multiexit::inferkit {

CascadeCache build_cascade_cache(const exitnet::MultiExitNetwork& net, const Dataset& data) {
  if (data.size() == 0) throw ContractError("calibration needs a non-empty validation set");
  CascadeCache cache;
  cache.exit_count = net.exit_count();
  cache.entropy.reserve(data.size() * cache.exit_count);
  cache.exit_correct.reserve(data.size() * cache.exit_count);
  cache.final_correct.reserve(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto trace = net.eval_all_exits(data.row(s), /*with_gates=*/false);
    for (int j = 0; j < cache.exit_count; ++j) {
      const auto& p = trace.predictions[j];
      cache.entropy.push_back(normalized_entropy(p, net.class_count()));
      const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      cache.exit_correct.push_back(pred == data.labels[s] ? 1 : 0);
    }
    const auto& f = trace.final_prediction;
    const int pred = static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
    cache.final_correct.push_back(pred == data.labels[s] ? 1 : 0);
  }
  return cache;
}

double CascadeCache::shared_threshold_accuracy(double beta) const {
  long correct = 0;
  for (std::size_t s = 0; s < size(); ++s) {
    bool stopped = false;
    for (int j = 0; j < exit_count && !stopped; ++j) {
      if (entropy_at(s, j) <= beta) {
        stopped = true;
        correct += correct_at(s, j) ? 1 : 0;
      }
    }
    if (!stopped) correct += final_correct[s] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(size());
}

std::vector<double> calibrate_thresholds_per_exit(const CascadeCache& cache, double budget) {
  std::vector<double> betas(cache.exit_count, 0.0);
  for (int j = 0; j < cache.exit_count; ++j) {
    // Scan downward; the first threshold whose stopping set stays within
    // budget of the final exit on those same samples wins.
    for (int g = 100; g >= 0; --g) {
      const double beta = static_cast<double>(g) / 100.0;
      long stopped = 0;
      long correct_here = 0;
      long correct_final = 0;
      for (std::size_t s = 0; s < cache.size(); ++s) {
        if (cache.entropy_at(s, j) <= beta) {
          ++stopped;
          correct_here += cache.correct_at(s, j) ? 1 : 0;
          correct_final += cache.final_correct[s] ? 1 : 0;
        }
      }
      if (stopped == 0) {
        betas[j] = beta;
        break;
      }
      const double acc_here = static_cast<double>(correct_here) / static_cast<double>(stopped);
      const double acc_final = static_cast<double>(correct_final) / static_cast<double>(stopped);
      if (acc_here >= acc_final - budget) {
        betas[j] = beta;
        break;
      }
    }
  }
  return betas;
}

std::vector<double> calibrate_thresholds_per_exit(const exitnet::MultiExitNetwork& net,
                                                  const Dataset& validation, double budget) {
  return calibrate_thresholds_per_exit(build_cascade_cache(net, validation), budget);
}

SingleThresholdResult calibrate_single_threshold(const CascadeCache& cache,
                                                 double target_accuracy, double mu,
                                                 long max_iters) {
  SingleThresholdResult result;
  const double base_acc = cache.shared_threshold_accuracy(0.0);
  if (base_acc < target_accuracy) {
    result.feasible = false;
    result.beta = 0.0;
    result.achieved_accuracy = base_acc;
    return result;
  }
  result.feasible = true;

  double beta = 0.0;
  double best_beta = 0.0;
  double best_acc = base_acc;
  for (long it = 0; it < max_iters; ++it) {
    const double acc = cache.shared_threshold_accuracy(beta);
    result.log.push_back({it, beta, acc});
    result.iterations = it + 1;
    if (std::abs(acc - target_accuracy) < std::abs(best_acc - target_accuracy)) {
      best_acc = acc;
      best_beta = beta;
    }
    if (std::abs(acc - target_accuracy) <= 0.01) {
      result.converged = true;
      result.beta = beta;
      result.achieved_accuracy = acc;
      return result;
    }
    beta = std::min(1.0, std::max(0.0, beta + mu * (acc - target_accuracy)));
  }
  result.converged = false;
  result.beta = best_beta;
  result.achieved_accuracy = best_acc;
  return result;
}

SingleThresholdResult calibrate_single_threshold(const exitnet::MultiExitNetwork& net,
                                                 const Dataset& validation, double target_accuracy,
                                                 double mu, long max_iters) {
  return calibrate_single_threshold(build_cascade_cache(net, validation), target_accuracy, mu,
                                    max_iters);
}

void save_calibration_json(const std::string& path, const std::vector<double>& per_exit_beta,
                           const SingleThresholdResult* single) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["per_exit_beta"] = per_exit_beta;
  if (single) {
    nlohmann::json s;
    s["feasible"] = single->feasible;
    s["converged"] = single->converged;
    s["beta"] = single->beta;
    s["achieved_accuracy"] = single->achieved_accuracy;
    s["iterations"] = single->iterations;
    auto& log = s["log"] = nlohmann::json::array();
    for (const auto& e : single->log) {
      log.push_back({{"iteration", e.iteration}, {"beta", e.beta}, {"accuracy", e.accuracy}});
    }
    doc["single_threshold"] = std::move(s);
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open calibration report for writing: " + path);
  out << doc.dump(1) << "\n";
}

}  // namespace multiexit::inferkit
