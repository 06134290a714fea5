#include "multiexit/trainkit/local_feedback.hpp"

#include <chrono>
#include <cmath>

#include "multiexit/numcore/kernels.hpp"
#include "multiexit/numcore/optimizer.hpp"

namespace multiexit::trainkit {

using exitnet::MultiExitNetwork;
using numcore::ParamGroup;
using numcore::SgdOptimizer;
using numcore::Tensor;
using numcore::TensorPtr;
namespace ops = numcore::ops;

std::vector<RandomFeedbackPair> make_feedback_pairs(const MultiExitNetwork& net,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RandomFeedbackPair> pairs;
  for (int j = 0; j < net.exit_count(); ++j) {
    const int dim = net.embedding_dim(j);
    const int classes = net.class_count();
    const double limit = std::sqrt(6.0 / (dim + classes));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto draw = [&] {
      std::vector<double> m(static_cast<std::size_t>(dim) * classes);
      for (auto& v : m) v = dist(rng);
      return Tensor::make({dim, classes}, std::move(m));
    };
    RandomFeedbackPair pair;
    pair.attach_index = net.attach_index(j);
    pair.forward_matrix = draw();
    pair.backward_matrix = draw();
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

namespace {

// logits = h * M  (h: [B,dim], M: [dim,C])
std::vector<double> project(const std::vector<double>& h, int rows, int dim,
                            const numcore::TensorPtr& m, int classes) {
  std::vector<double> logits(static_cast<std::size_t>(rows) * classes, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* hr = h.data() + static_cast<std::size_t>(r) * dim;
    double* lr = logits.data() + static_cast<std::size_t>(r) * classes;
    for (int d = 0; d < dim; ++d) {
      const double hv = hr[d];
      const double* md = m->data().data() + static_cast<std::size_t>(d) * classes;
      for (int c = 0; c < classes; ++c) lr[c] += hv * md[c];
    }
  }
  return logits;
}

}  // namespace

TrainResult train_local_feedback(MultiExitNetwork& net, const Dataset& data,
                                 const TrainingConfig& cfg,
                                 std::vector<RandomFeedbackPair>& pairs,
                                 const IterationObserver& observer) {
  cfg.validate();
  const auto ranges = stage_ranges(net);
  const int stages = static_cast<int>(ranges.size());
  const int classes = net.class_count();
  if (static_cast<int>(pairs.size()) != stages - 1) {
    throw ConfigError("need one feedback pair per early-exit stage");
  }

  std::vector<ParamGroup> groups;
  for (int s = 0; s < stages; ++s) {
    const auto [first, last] = ranges[s];
    ParamGroup g;
    g.name = "stage." + std::to_string(s);
    g.lr = cfg.learning_rate;
    for (int i = first; i <= last; ++i) {
      const auto& b = net.backbone()[i - 1];
      if (b.has_params()) {
        g.params.push_back(b.weight);
        g.params.push_back(b.bias);
      }
    }
    if (!g.params.empty()) groups.push_back(std::move(g));
  }
  SgdOptimizer opt(std::move(groups));

  TrainResult result;
  BatchStream stream(data.size(), cfg.batch_size, cfg.seed);
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& idx : stream.next_epoch()) {
      const int rows = static_cast<int>(idx.size());
      std::vector<double> h_vals;
      std::vector<int> y;
      h_vals.reserve(idx.size() * data.feature_dim);
      y.reserve(idx.size());
      for (auto i : idx) {
        const auto row = data.row(i);
        h_vals.insert(h_vals.end(), row.begin(), row.end());
        y.push_back(data.labels[i]);
      }

      opt.zero_grad();
      for (int s = 0; s < stages; ++s) {
        const auto [first, last] = ranges[s];
        const int in_dim = net.backbone()[first - 1].in_dim;
        // Stage input is a constant: no gradient crosses the boundary.
        auto x = Tensor::make({rows, in_dim}, h_vals);
        auto h = net.forward_backbone_range(x, first, last);
        if (s < stages - 1) {
          const int dim = net.backbone()[last - 1].out_dim;
          const auto& pair = pairs[s];
          auto logits = project(h->data(), rows, dim, pair.forward_matrix, classes);
          std::vector<double> probs(logits.size());
          numcore::kernels::softmax(logits.data(), rows, classes, probs.data());
          // d(mean CE)/d(logits) = (p - onehot)/B, pushed back through K
          // in place of M's transpose.
          std::vector<double> dlogits(probs);
          for (int r = 0; r < rows; ++r) {
            dlogits[static_cast<std::size_t>(r) * classes + y[r]] -= 1.0;
          }
          const double inv = 1.0 / rows;
          for (auto& v : dlogits) v *= inv;
          std::vector<double> dh(static_cast<std::size_t>(rows) * dim, 0.0);
          const auto& kmat = pair.backward_matrix->data();
          for (int r = 0; r < rows; ++r) {
            const double* dl = dlogits.data() + static_cast<std::size_t>(r) * classes;
            double* dhr = dh.data() + static_cast<std::size_t>(r) * dim;
            for (int d = 0; d < dim; ++d) {
              const double* kd = kmat.data() + static_cast<std::size_t>(d) * classes;
              double acc = 0.0;
              for (int c = 0; c < classes; ++c) acc += dl[c] * kd[c];
              dhr[d] = acc;
            }
          }
          numcore::backward_seeded(h, dh);
        } else {
          const auto loss = ops::cross_entropy(h, y);
          if (!loss->all_finite()) {
            throw NumericError("local-feedback final stage diverged");
          }
          numcore::backward(loss);
        }
        h_vals = h->data();
      }
      opt.step();
      ++result.steps;
      if (observer) observer(result.steps);
    }
    const auto metrics = evaluate_metrics(net, data);
    if (result.exit_loss.empty()) {
      result.exit_loss.resize(metrics.loss.size());
      result.exit_accuracy.resize(metrics.loss.size());
    }
    for (std::size_t e = 0; e < metrics.loss.size(); ++e) {
      result.exit_loss[e].push_back(metrics.loss[e]);
      result.exit_accuracy[e].push_back(metrics.accuracy[e]);
    }
    result.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return result;
}

TrainResult train_local_feedback(MultiExitNetwork& net, const Dataset& data,
                                 const TrainingConfig& cfg, const IterationObserver& observer) {
  auto pairs = make_feedback_pairs(net, derive_seed(cfg.seed, 4242));
  return train_local_feedback(net, data, cfg, pairs, observer);
}

TrainResult train(MultiExitNetwork& net, const Dataset& data, const TrainingConfig& cfg,
                  const IterationObserver& observer) {
  switch (cfg.strategy) {
    case Strategy::Joint: return train_joint(net, data, cfg, observer);
    case Strategy::CombinedOutput: return train_combined_output(net, data, cfg, observer);
    case Strategy::GatedRecursive: return train_gated_recursive(net, data, cfg, observer);
    case Strategy::Layerwise: return train_layerwise(net, data, cfg, observer);
    case Strategy::Separate: return train_separate(net, data, cfg, observer);
    case Strategy::Freezeout: return train_freezeout(net, data, cfg, observer);
    case Strategy::CostRegularized: return train_cost_regularized(net, data, cfg, observer);
    case Strategy::LocalFeedback: return train_local_feedback(net, data, cfg, observer);
  }
  throw ContractError("unhandled strategy");
}

}  // namespace multiexit::trainkit
