#include "multiexit/trainkit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "multiexit/common/csv.hpp"
#include "multiexit/inferkit/adaptive.hpp"
#include "multiexit/numcore/kernels.hpp"
#include "multiexit/numcore/optimizer.hpp"

namespace multiexit::trainkit {

using exitnet::MultiExitNetwork;
using numcore::ParamGroup;
using numcore::SgdOptimizer;
using numcore::Tensor;
using numcore::TensorPtr;
namespace ops = numcore::ops;

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Joint: return "joint";
    case Strategy::CombinedOutput: return "combined_output";
    case Strategy::GatedRecursive: return "gated_recursive";
    case Strategy::Layerwise: return "layerwise";
    case Strategy::Separate: return "separate";
    case Strategy::Freezeout: return "freezeout";
    case Strategy::CostRegularized: return "cost_regularized";
    case Strategy::LocalFeedback: return "local_feedback";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "joint") return Strategy::Joint;
  if (name == "combined_output") return Strategy::CombinedOutput;
  if (name == "gated_recursive") return Strategy::GatedRecursive;
  if (name == "layerwise") return Strategy::Layerwise;
  if (name == "separate") return Strategy::Separate;
  if (name == "freezeout") return Strategy::Freezeout;
  if (name == "cost_regularized") return Strategy::CostRegularized;
  if (name == "local_feedback") return Strategy::LocalFeedback;
  throw ParseError("unknown training strategy: " + name);
}

void TrainingConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (learning_rate < 0.0) throw ConfigError("learning rate must be nonnegative");
  for (double a : exit_loss_weights) {
    if (a < 0.0) throw ConfigError("exit loss weights must be nonnegative");
  }
  for (std::size_t i = 1; i < freeze_points.size(); ++i) {
    if (freeze_points[i] < freeze_points[i - 1]) {
      throw ConfigError("freeze points must be nondecreasing");
    }
  }
  for (double e : exit_costs) {
    if (e <= 0.0) throw ConfigError("exit costs must be positive");
  }
  if (cost_strength < 0.0) throw ConfigError("cost strength must be nonnegative");
}

std::vector<double> TrainingConfig::resolved_exit_weights(int exit_count) const {
  if (!exit_loss_weights.empty()) {
    if (static_cast<int>(exit_loss_weights.size()) != exit_count) {
      throw ConfigError("expected one exit loss weight per exit");
    }
    return exit_loss_weights;
  }
  std::vector<double> alphas(exit_count, 0.3);
  if (linear_exit_weights) {
    for (int j = 0; j < exit_count; ++j) {
      alphas[j] = 0.3 * static_cast<double>(j + 1) / static_cast<double>(exit_count);
    }
  }
  return alphas;
}

double freezeout_learning_rate(double base_lr, long t, long freeze_point) {
  if (t < 0) throw ContractError("negative iteration");
  if (freeze_point <= 0) throw ContractError("freeze point must be positive");
  if (t >= freeze_point) return 0.0;
  constexpr double kPi = 3.14159265358979323846;
  return 0.5 * base_lr * (1.0 + std::cos(kPi * static_cast<double>(t) / freeze_point));
}

std::vector<long> equispaced_freeze_points(int stages, long total_steps) {
  if (stages < 1) throw ContractError("need at least one stage");
  std::vector<long> points(stages);
  for (int i = 1; i <= stages; ++i) {
    points[i - 1] = (total_steps * i) / stages;
  }
  return points;
}

std::vector<std::pair<int, int>> stage_ranges(const MultiExitNetwork& net) {
  std::vector<std::pair<int, int>> ranges;
  int first = 1;
  for (int j = 0; j < net.exit_count(); ++j) {
    ranges.emplace_back(first, net.attach_index(j));
    first = net.attach_index(j) + 1;
  }
  ranges.emplace_back(first, net.depth());
  return ranges;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (salt + 1));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x;
}

BatchStream::BatchStream(std::size_t n, int batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(seed) {}

std::vector<std::vector<std::size_t>> BatchStream::next_epoch() {
  std::vector<std::size_t> order(n_);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n_; start += batch_size_) {
    const std::size_t end = std::min(n_, start + batch_size_);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

namespace {

struct Batch {
  TensorPtr x;
  std::vector<int> y;
};

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& idx) {
  Batch b;
  std::vector<double> feats;
  feats.reserve(idx.size() * data.feature_dim);
  b.y.reserve(idx.size());
  for (auto i : idx) {
    const auto row = data.row(i);
    feats.insert(feats.end(), row.begin(), row.end());
    b.y.push_back(data.labels[i]);
  }
  b.x = Tensor::make({static_cast<int>(idx.size()), data.feature_dim}, std::move(feats));
  return b;
}

void check_exit_losses(const std::vector<TensorPtr>& exit_losses, const TensorPtr& final_loss,
                       const char* what) {
  for (std::size_t j = 0; j < exit_losses.size(); ++j) {
    if (exit_losses[j] && !exit_losses[j]->all_finite()) {
      throw NumericError(std::string(what) + " loss diverged at exit " + std::to_string(j + 1));
    }
  }
  if (final_loss && !final_loss->all_finite()) {
    throw NumericError(std::string(what) + " loss diverged at the final exit");
  }
}

// The loss clamp can mask a NaN prediction, so divergence is detected on
// the forward values themselves.
void check_trace_finite(const exitnet::ExitTrace& trace, const char* what) {
  for (std::size_t j = 0; j < trace.predictions.size(); ++j) {
    if (!trace.predictions[j]->all_finite()) {
      throw NumericError(std::string(what) + " loss diverged at exit " + std::to_string(j + 1));
    }
  }
  if (trace.final_prediction && !trace.final_prediction->all_finite()) {
    throw NumericError(std::string(what) + " loss diverged at the final exit");
  }
}

ParamGroup backbone_group(const MultiExitNetwork& net, double lr) {
  ParamGroup g;
  g.name = "backbone";
  g.lr = lr;
  for (const auto& b : net.backbone()) {
    if (b.has_params()) {
      g.params.push_back(b.weight);
      g.params.push_back(b.bias);
    }
  }
  return g;
}

ParamGroup head_group(const MultiExitNetwork& net, int ordinal, double lr) {
  ParamGroup g;
  g.name = "exit." + std::to_string(net.attach_index(ordinal));
  g.lr = lr;
  for (const auto& layer : net.exits()[ordinal].layers) {
    if (layer.has_params()) {
      g.params.push_back(layer.weight);
      g.params.push_back(layer.bias);
    }
  }
  return g;
}

ParamGroup gate_group(const MultiExitNetwork& net, int ordinal, double lr) {
  ParamGroup g;
  g.name = "gate." + std::to_string(net.gates()[ordinal].attach_index);
  g.lr = lr;
  g.params.push_back(net.gates()[ordinal].lin.weight);
  g.params.push_back(net.gates()[ordinal].lin.bias);
  return g;
}

ParamGroup stage_blocks_group(const MultiExitNetwork& net, int stage, int first, int last,
                              double lr) {
  ParamGroup g;
  g.name = "stage." + std::to_string(stage) + ".blocks";
  g.lr = lr;
  for (int i = first; i <= last; ++i) {
    const auto& b = net.backbone()[i - 1];
    if (b.has_params()) {
      g.params.push_back(b.weight);
      g.params.push_back(b.bias);
    }
  }
  return g;
}

class EpochTimer {
 public:
  void start() { t0_ = std::chrono::steady_clock::now(); }
  double stop_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

void record_epoch(TrainResult& result, const MultiExitNetwork& net, const Dataset& data,
                  double wall_ms) {
  const auto metrics = evaluate_metrics(net, data);
  if (result.exit_loss.empty()) {
    result.exit_loss.resize(metrics.loss.size());
    result.exit_accuracy.resize(metrics.loss.size());
  }
  for (std::size_t e = 0; e < metrics.loss.size(); ++e) {
    result.exit_loss[e].push_back(metrics.loss[e]);
    result.exit_accuracy[e].push_back(metrics.accuracy[e]);
  }
  result.wall_ms.push_back(wall_ms);
}

// Recursive gated combination over graph nodes:
//   c_hat_j = g_j * c_j + (1 - g_j) * c_hat_{j+1},  c_hat_K = final.
TensorPtr gated_combination(const exitnet::ExitTrace& trace) {
  TensorPtr combined = trace.final_prediction;
  for (int j = static_cast<int>(trace.predictions.size()) - 1; j >= 0; --j) {
    const auto& g = trace.gate_values[j];
    combined = ops::add(ops::mul(trace.predictions[j], g), ops::mul(combined, ops::one_minus(g)));
  }
  return combined;
}

}  // namespace

EpochMetrics evaluate_metrics(const MultiExitNetwork& net, const Dataset& data) {
  const int k = net.exit_count();
  const int n = static_cast<int>(data.size());
  EpochMetrics m;
  m.loss.assign(k + 1, 0.0);
  m.accuracy.assign(k + 1, 0.0);
  if (n == 0) return m;

  auto tally = [&](const std::vector<double>& probs, int point) {
    const int c = net.class_count();
    double loss = 0.0;
    long correct = 0;
    for (int r = 0; r < n; ++r) {
      const double* row = probs.data() + static_cast<std::size_t>(r) * c;
      double p = row[data.labels[r]];
      p = std::min(1.0, std::max(ops::kProbClamp, p));
      loss -= std::log(p);
      const int pred = static_cast<int>(std::max_element(row, row + c) - row);
      if (pred == data.labels[r]) ++correct;
    }
    m.loss[point] = loss / n;
    m.accuracy[point] = static_cast<double>(correct) / n;
  };

  std::vector<double> h = data.features;
  int next_exit = 0;
  for (int i = 1; i <= net.depth(); ++i) {
    h = net.backbone()[i - 1].eval(h, n);
    while (next_exit < k && net.attach_index(next_exit) == i) {
      tally(net.eval_head(next_exit, h, n), next_exit);
      ++next_exit;
    }
  }
  tally(h, k);
  return m;
}

TrainResult train_joint(MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                        const IterationObserver& observer) {
  cfg.validate();
  const int k = net.exit_count();
  const auto alphas = cfg.resolved_exit_weights(k);

  std::vector<ParamGroup> groups{backbone_group(net, cfg.learning_rate)};
  for (int j = 0; j < k; ++j) {
    if (alphas[j] > 0.0) groups.push_back(head_group(net, j, cfg.learning_rate));
  }
  SgdOptimizer opt(std::move(groups));

  TrainResult result;
  BatchStream stream(data.size(), cfg.batch_size, cfg.seed);
  EpochTimer timer;
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    timer.start();
    for (const auto& idx : stream.next_epoch()) {
      const auto batch = make_batch(data, idx);
      opt.zero_grad();
      const auto trace = net.forward_all_exits(batch.x, /*with_gates=*/false);
      check_trace_finite(trace, "joint");
      std::vector<TensorPtr> exit_losses(k);
      TensorPtr total;
      for (int j = 0; j < k; ++j) {
        if (alphas[j] > 0.0) exit_losses[j] = ops::cross_entropy(trace.predictions[j], batch.y);
      }
      const auto final_loss = ops::cross_entropy(trace.final_prediction, batch.y);
      check_exit_losses(exit_losses, final_loss, "joint");
      total = final_loss;
      for (int j = 0; j < k; ++j) {
        if (exit_losses[j]) total = ops::add(total, ops::scale(exit_losses[j], alphas[j]));
      }
      numcore::backward(total);
      opt.step();
      ++result.steps;
      if (observer) observer(result.steps);
    }
    record_epoch(result, net, data, timer.stop_ms());
  }
  return result;
}

TrainResult train_combined_output(MultiExitNetwork& net, const Dataset& data,
                                  const TrainingConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  const int k = net.exit_count();
  const int m = k + 1;

  std::vector<double> init(m, 1.0 / m);
  if (!cfg.combo_weights.empty()) {
    if (static_cast<int>(cfg.combo_weights.size()) != m) {
      throw ConfigError("combined-output needs one weight per exit plus the final");
    }
    init = cfg.combo_weights;
  }

  TensorPtr weights;  // trainable raw weights or softmax logits
  if (cfg.combo_mode == ComboMode::Fixed) {
    double sum = 0.0;
    for (double w : init) sum += w;
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("fixed combination weights must sum to 1");
    }
  } else if (cfg.combo_mode == ComboMode::Trainable) {
    weights = Tensor::make({m}, init, true);
  } else {
    std::vector<double> logits(m);
    for (int j = 0; j < m; ++j) logits[j] = std::log(std::max(init[j], 1e-12));
    weights = Tensor::make({m}, logits, true);
  }

  std::vector<ParamGroup> groups{backbone_group(net, cfg.learning_rate)};
  for (int j = 0; j < k; ++j) groups.push_back(head_group(net, j, cfg.learning_rate));
  if (weights) {
    ParamGroup wg;
    wg.name = "combination";
    wg.lr = cfg.learning_rate;
    wg.params.push_back(weights);
    groups.push_back(wg);
  }
  SgdOptimizer opt(std::move(groups));

  TrainResult result;
  BatchStream stream(data.size(), cfg.batch_size, cfg.seed);
  EpochTimer timer;
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    timer.start();
    for (const auto& idx : stream.next_epoch()) {
      const auto batch = make_batch(data, idx);
      opt.zero_grad();
      const auto trace = net.forward_all_exits(batch.x, /*with_gates=*/false);
      check_trace_finite(trace, "combined-output");
      std::vector<TensorPtr> preds = trace.predictions;
      preds.push_back(trace.final_prediction);

      TensorPtr combined;
      if (cfg.combo_mode == ComboMode::Fixed) {
        for (int j = 0; j < m; ++j) {
          auto term = ops::scale(preds[j], init[j]);
          combined = combined ? ops::add(combined, term) : term;
        }
      } else {
        TensorPtr w = cfg.combo_mode == ComboMode::Trainable ? weights : ops::softmax_rows(weights);
        for (int j = 0; j < m; ++j) {
          auto term = ops::mul(preds[j], ops::select(w, j));
          combined = combined ? ops::add(combined, term) : term;
        }
      }
      const auto loss = ops::cross_entropy(combined, batch.y);
      check_exit_losses({}, loss, "combined-output");
      numcore::backward(loss);
      opt.step();
      ++result.steps;
      if (observer) observer(result.steps);
    }
    record_epoch(result, net, data, timer.stop_ms());
  }

  if (cfg.combo_mode == ComboMode::Fixed) {
    result.combination_weights = init;
  } else if (cfg.combo_mode == ComboMode::Trainable) {
    result.combination_weights = weights->data();
  } else {
    result.combination_weights.resize(m);
    numcore::kernels::softmax(weights->data().data(), 1, m, result.combination_weights.data());
  }
  return result;
}

namespace {

TrainResult train_gated_impl(MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                             const IterationObserver& observer, bool with_cost) {
  cfg.validate();
  const int k = net.exit_count();
  if (!net.has_gates() || static_cast<int>(net.gates().size()) != k) {
    throw ConfigError("gated training requires a gate at every exit");
  }

  std::vector<double> eps = cfg.exit_costs;
  if (with_cost) {
    if (eps.empty()) eps = inferkit::cascade_exit_costs(net);
    if (static_cast<int>(eps.size()) != k + 1) {
      throw ConfigError("cost regularization needs one cost per exit point");
    }
  }

  std::vector<ParamGroup> groups{backbone_group(net, cfg.learning_rate)};
  for (int j = 0; j < k; ++j) groups.push_back(head_group(net, j, cfg.learning_rate));
  for (int j = 0; j < k; ++j) groups.push_back(gate_group(net, j, cfg.learning_rate));
  SgdOptimizer opt(std::move(groups));

  TrainResult result;
  BatchStream stream(data.size(), cfg.batch_size, cfg.seed);
  EpochTimer timer;
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    timer.start();
    for (const auto& idx : stream.next_epoch()) {
      const auto batch = make_batch(data, idx);
      opt.zero_grad();
      const auto trace = net.forward_all_exits(batch.x, /*with_gates=*/true);
      check_trace_finite(trace, with_cost ? "cost-regularized" : "gated");
      const auto combined = gated_combination(trace);
      auto loss = ops::cross_entropy(combined, batch.y);
      check_exit_losses({}, loss, with_cost ? "cost-regularized" : "gated");

      if (with_cost && cfg.cost_strength > 0.0) {
        // Soft expected cost: sum_j p_j eps_j with
        // p_j = g_j * prod_{l<j} (1 - g_l) and the leftover mass at the
        // final exit.
        TensorPtr survivor;  // prod (1 - g_l) so far, [B,1]
        TensorPtr cost;
        for (int j = 0; j < k; ++j) {
          const auto& g = trace.gate_values[j];
          TensorPtr p_j = survivor ? ops::mul(g, survivor) : g;
          auto term = ops::scale(p_j, eps[j]);
          cost = cost ? ops::add(cost, term) : term;
          survivor = survivor ? ops::mul(survivor, ops::one_minus(g)) : ops::one_minus(g);
        }
        cost = ops::add(cost, ops::scale(survivor, eps[k]));
        loss = ops::add(loss, ops::scale(ops::mean(cost), cfg.cost_strength));
      }

      numcore::backward(loss);
      opt.step();
      ++result.steps;
      if (observer) observer(result.steps);
    }
    record_epoch(result, net, data, timer.stop_ms());
  }
  return result;
}

}  // namespace

TrainResult train_gated_recursive(MultiExitNetwork& net, const Dataset& data,
                                  const TrainingConfig& cfg, const IterationObserver& observer) {
  return train_gated_impl(net, data, cfg, observer, /*with_cost=*/false);
}

TrainResult train_cost_regularized(MultiExitNetwork& net, const Dataset& data,
                                   const TrainingConfig& cfg, const IterationObserver& observer) {
  return train_gated_impl(net, data, cfg, observer, /*with_cost=*/true);
}

TrainResult train_layerwise(MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                            const IterationObserver& observer) {
  cfg.validate();
  const auto ranges = stage_ranges(net);
  const int stages = static_cast<int>(ranges.size());
  const int k = net.exit_count();
  const int n = static_cast<int>(data.size());

  TrainResult result;
  EpochTimer timer;
  std::vector<double> cache = data.features;  // inputs of the current stage
  for (int s = 0; s < stages; ++s) {
    const auto [first, last] = ranges[s];
    std::vector<ParamGroup> groups{stage_blocks_group(net, s, first, last, cfg.learning_rate)};
    if (s < k) groups.push_back(head_group(net, s, cfg.learning_rate));
    SgdOptimizer opt(std::move(groups));

    const int in_dim = net.backbone()[first - 1].in_dim;
    BatchStream stream(data.size(), cfg.batch_size, derive_seed(cfg.seed, s));
    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
      timer.start();
      for (const auto& idx : stream.next_epoch()) {
        std::vector<double> feats;
        std::vector<int> y;
        feats.reserve(idx.size() * in_dim);
        y.reserve(idx.size());
        for (auto i : idx) {
          const auto* row = cache.data() + i * static_cast<std::size_t>(in_dim);
          feats.insert(feats.end(), row, row + in_dim);
          y.push_back(data.labels[i]);
        }
        auto x = Tensor::make({static_cast<int>(idx.size()), in_dim}, std::move(feats));

        opt.zero_grad();
        auto h = net.forward_backbone_range(x, first, last);
        TensorPtr probs = s < k ? net.forward_head(s, h).second : h;
        const auto loss = ops::cross_entropy(probs, y);
        if (!probs->all_finite() || !loss->all_finite()) {
          throw NumericError("layerwise stage " + std::to_string(s + 1) + " diverged");
        }
        numcore::backward(loss);
        opt.step();
        ++result.steps;
        if (observer) observer(result.steps);
      }
      record_epoch(result, net, data, timer.stop_ms());
    }
    // Frozen stage becomes the next stage's dataset.
    if (s + 1 < stages) cache = net.eval_backbone_range(cache, n, first, last);
  }
  return result;
}

TrainResult train_separate(MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                           const IterationObserver& observer) {
  cfg.validate();
  const int k = net.exit_count();
  const int n = static_cast<int>(data.size());

  TrainResult result;
  EpochTimer timer;

  // Phase 1: backbone alone on the final loss.
  {
    SgdOptimizer opt({backbone_group(net, cfg.learning_rate)});
    BatchStream stream(data.size(), cfg.batch_size, cfg.seed);
    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
      timer.start();
      for (const auto& idx : stream.next_epoch()) {
        const auto batch = make_batch(data, idx);
        opt.zero_grad();
        auto probs = net.forward_backbone_range(batch.x, 1, net.depth());
        if (!probs->all_finite()) {
          throw NumericError("separate phase 1 diverged at the final exit");
        }
        const auto loss = ops::cross_entropy(probs, batch.y);
        check_exit_losses({}, loss, "separate phase 1");
        numcore::backward(loss);
        opt.step();
        ++result.steps;
        if (observer) observer(result.steps);
      }
      record_epoch(result, net, data, timer.stop_ms());
    }
  }

  // Phase 2: backbone frozen, each head on its companion loss over cached
  // embeddings.
  std::vector<double> cache = data.features;
  int reached = 0;
  for (int j = 0; j < k; ++j) {
    const int attach = net.attach_index(j);
    if (attach > reached) {
      cache = net.eval_backbone_range(cache, n, reached + 1, attach);
      reached = attach;
    }
    const int dim = net.embedding_dim(j);
    SgdOptimizer opt({head_group(net, j, cfg.learning_rate)});
    BatchStream stream(data.size(), cfg.batch_size, derive_seed(cfg.seed, 1000 + j));
    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
      timer.start();
      for (const auto& idx : stream.next_epoch()) {
        std::vector<double> feats;
        std::vector<int> y;
        feats.reserve(idx.size() * dim);
        for (auto i : idx) {
          const auto* row = cache.data() + i * static_cast<std::size_t>(dim);
          feats.insert(feats.end(), row, row + dim);
          y.push_back(data.labels[i]);
        }
        auto x = Tensor::make({static_cast<int>(idx.size()), dim}, std::move(feats));
        opt.zero_grad();
        const auto probs = net.forward_head(j, x).second;
        if (!probs->all_finite()) {
          throw NumericError("separate phase 2 diverged at exit " + std::to_string(j + 1));
        }
        const auto loss = ops::cross_entropy(probs, y);
        check_exit_losses({}, loss, "separate phase 2");
        numcore::backward(loss);
        opt.step();
        ++result.steps;
        if (observer) observer(result.steps);
      }
      record_epoch(result, net, data, timer.stop_ms());
    }
  }
  return result;
}

TrainResult train_freezeout(MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                            const IterationObserver& observer) {
  cfg.validate();
  const int k = net.exit_count();
  const auto alphas = cfg.resolved_exit_weights(k);
  const auto ranges = stage_ranges(net);
  const int stages = static_cast<int>(ranges.size());

  const long batches_per_epoch =
      static_cast<long>((data.size() + cfg.batch_size - 1) / cfg.batch_size);
  const long total_steps = cfg.epochs * batches_per_epoch;

  std::vector<long> points = cfg.freeze_points;
  if (points.empty()) {
    points = equispaced_freeze_points(stages, total_steps);
  } else if (static_cast<int>(points.size()) != stages) {
    throw ConfigError("expected one freeze point per stage");
  }
  if (!points.empty() && points.back() > total_steps) {
    throw ConfigError("last freeze point exceeds the training budget");
  }

  std::vector<ParamGroup> groups;
  for (int s = 0; s < stages; ++s) {
    const auto [first, last] = ranges[s];
    auto blocks = stage_blocks_group(net, s, first, last, cfg.learning_rate);
    const double base = cfg.learning_rate;
    const long t_i = std::max<long>(1, points[s]);
    blocks.schedule = [base, t_i](long t) { return freezeout_learning_rate(base, t, t_i); };
    groups.push_back(std::move(blocks));
    if (s < k && alphas[s] > 0.0) {
      auto head = head_group(net, s, cfg.learning_rate);
      head.schedule = [base, t_i](long t) { return freezeout_learning_rate(base, t, t_i); };
      groups.push_back(std::move(head));
    }
  }
  SgdOptimizer opt(std::move(groups));

  TrainResult result;
  BatchStream stream(data.size(), cfg.batch_size, cfg.seed);
  EpochTimer timer;
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    timer.start();
    for (const auto& idx : stream.next_epoch()) {
      const auto batch = make_batch(data, idx);
      opt.zero_grad();
      const auto trace = net.forward_all_exits(batch.x, /*with_gates=*/false);
      check_trace_finite(trace, "freezeout");
      std::vector<TensorPtr> exit_losses(k);
      for (int j = 0; j < k; ++j) {
        if (alphas[j] > 0.0) exit_losses[j] = ops::cross_entropy(trace.predictions[j], batch.y);
      }
      const auto final_loss = ops::cross_entropy(trace.final_prediction, batch.y);
      check_exit_losses(exit_losses, final_loss, "freezeout");
      TensorPtr total = final_loss;
      for (int j = 0; j < k; ++j) {
        if (exit_losses[j]) total = ops::add(total, ops::scale(exit_losses[j], alphas[j]));
      }
      numcore::backward(total);
      opt.step();
      ++result.steps;
      if (observer) observer(result.steps);
    }
    record_epoch(result, net, data, timer.stop_ms());
  }
  return result;
}

void save_metrics_csv(const TrainResult& result, const MultiExitNetwork& net,
                      const std::string& path) {
  CsvWriter w(path, {"epoch", "exit", "loss", "accuracy", "wall_ms"});
  const int points = static_cast<int>(result.exit_loss.size());
  const std::size_t epochs = result.wall_ms.size();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (int e = 0; e < points; ++e) {
      const std::string label =
          e + 1 < points ? std::to_string(net.attach_index(e)) : std::string("final");
      w.row({std::to_string(epoch), label, fmt_double(result.exit_loss[e][epoch]),
             fmt_double(result.exit_accuracy[e][epoch]), fmt_double(result.wall_ms[epoch])});
    }
  }
}

}  // namespace multiexit::trainkit
