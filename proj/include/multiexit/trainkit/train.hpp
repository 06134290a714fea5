#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/exitnet/network.hpp"

namespace multiexit::trainkit {

enum class Strategy {
  Joint,
  CombinedOutput,
  GatedRecursive,
  Layerwise,
  Separate,
  Freezeout,
  CostRegularized,
  LocalFeedback,
};

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

enum class ComboMode { Fixed, Trainable, SoftmaxNormalized };

struct TrainingConfig {
  Strategy strategy = Strategy::Joint;
  long epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.1;

  // Joint/freezeout companion-loss weights, one per exit. Empty means the
  // Inception default 0.3 everywhere; linear_exit_weights instead ramps
  // them up toward the deepest exit (earlier classifiers weighted less).
  std::vector<double> exit_loss_weights;
  bool linear_exit_weights = false;

  // Combined-output mode and initial weights (exits first, final last).
  ComboMode combo_mode = ComboMode::SoftmaxNormalized;
  std::vector<double> combo_weights;

  // Freezeout points per stage, in optimizer steps; empty means equispaced
  // over the whole run.
  std::vector<long> freeze_points;

  // Cost regularization: per-exit-point costs (exits then final) and the
  // penalty strength. Empty costs fall back to the static cascade counts.
  std::vector<double> exit_costs;
  double cost_strength = 0.0;

  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> resolved_exit_weights(int exit_count) const;
};

struct TrainResult {
  // Indexed [exit point][epoch]; the final exit is the last row.
  std::vector<std::vector<double>> exit_loss;
  std::vector<std::vector<double>> exit_accuracy;
  std::vector<double> wall_ms;  // per epoch
  long steps = 0;
  std::vector<double> combination_weights;  // combined-output runs only
};

// Called after every optimizer step with the 1-based step counter.
using IterationObserver = std::function<void(long)>;

TrainResult train(exitnet::MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                  const IterationObserver& observer = {});

TrainResult train_joint(exitnet::MultiExitNetwork& net, const Dataset& data,
                        const TrainingConfig& cfg, const IterationObserver& observer = {});
TrainResult train_combined_output(exitnet::MultiExitNetwork& net, const Dataset& data,
                                  const TrainingConfig& cfg,
                                  const IterationObserver& observer = {});
TrainResult train_gated_recursive(exitnet::MultiExitNetwork& net, const Dataset& data,
                                  const TrainingConfig& cfg,
                                  const IterationObserver& observer = {});
TrainResult train_layerwise(exitnet::MultiExitNetwork& net, const Dataset& data,
                            const TrainingConfig& cfg, const IterationObserver& observer = {});
TrainResult train_separate(exitnet::MultiExitNetwork& net, const Dataset& data,
                           const TrainingConfig& cfg, const IterationObserver& observer = {});
TrainResult train_freezeout(exitnet::MultiExitNetwork& net, const Dataset& data,
                            const TrainingConfig& cfg, const IterationObserver& observer = {});
TrainResult train_cost_regularized(exitnet::MultiExitNetwork& net, const Dataset& data,
                                   const TrainingConfig& cfg,
                                   const IterationObserver& observer = {});

// Cosine annealing toward the stage's freezing point:
//   0.5 * base * (1 + cos(pi * t / t_i)) for t < t_i, 0 afterwards.
double freezeout_learning_rate(double base_lr, long t, long freeze_point);

// Freezing points i * total / stages for i = 1..stages.
std::vector<long> equispaced_freeze_points(int stages, long total_steps);

// Stage boundaries induced by the exits: stage k covers the backbone
// blocks after exit k-1 up to and including exit k's attach block; the
// last stage runs to the final block. Returned as (first, last) 1-based
// inclusive block ranges.
std::vector<std::pair<int, int>> stage_ranges(const exitnet::MultiExitNetwork& net);

// Deterministic derived stream for sub-procedures (per-head phases etc.).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// Per-epoch sample order: one shuffle drawn per epoch from a generator
// seeded only by cfg.seed, so equal seeds give identical batch sequences
// across strategies.
class BatchStream {
 public:
  BatchStream(std::size_t n, int batch_size, std::uint64_t seed);
  // Batches for the next epoch, in order.
  std::vector<std::vector<std::size_t>> next_epoch();

 private:
  std::size_t n_;
  int batch_size_;
  std::mt19937_64 rng_;
};

// Full-dataset per-exit loss and accuracy (final exit last), eval mode.
struct EpochMetrics {
  std::vector<double> loss;
  std::vector<double> accuracy;
};
EpochMetrics evaluate_metrics(const exitnet::MultiExitNetwork& net, const Dataset& data);

// Metrics CSV: epoch, exit point, loss, accuracy, wall time.
void save_metrics_csv(const TrainResult& result, const exitnet::MultiExitNetwork& net,
                      const std::string& path);

}  // namespace multiexit::trainkit
