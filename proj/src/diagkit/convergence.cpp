#include "multiexit/diagkit/convergence.hpp"

#include <algorithm>
#include <cmath>

#include "multiexit/common/csv.hpp"
#include "multiexit/numcore/ops.hpp"

namespace multiexit::diagkit {

double final_exit_loss(const exitnet::MultiExitNetwork& net, const Dataset& data) {
  const int n = static_cast<int>(data.size());
  if (n == 0) return 0.0;
  const auto probs = net.eval_backbone_range(data.features, n, 1, net.depth());
  const int c = net.class_count();
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    double p = probs[static_cast<std::size_t>(r) * c + data.labels[r]];
    p = std::min(1.0, std::max(numcore::ops::kProbClamp, p));
    loss -= std::log(p);
  }
  return loss / n;
}

std::vector<ConvergenceRecord> convergence_compare(const NetFactory& make_net, const Dataset& data,
                                                   const std::vector<std::string>& strategies,
                                                   double target_loss,
                                                   const std::vector<std::uint64_t>& seeds,
                                                   const trainkit::TrainingConfig& base_cfg) {
  std::vector<ConvergenceRecord> records;
  for (const auto seed : seeds) {
    std::uint64_t reference_fingerprint = 0;
    bool have_reference = false;
    for (const auto& label : strategies) {
      auto net = make_net(seed);
      const auto fingerprint = numcore::params_fingerprint(net.named_params());
      if (!have_reference) {
        reference_fingerprint = fingerprint;
        have_reference = true;
      } else if (fingerprint != reference_fingerprint) {
        throw ContractError("strategy comparison requires identical initial parameters");
      }

      trainkit::TrainingConfig cfg = base_cfg;
      cfg.seed = seed;
      if (label == "standard") {
        cfg.strategy = trainkit::Strategy::Joint;
        cfg.exit_loss_weights.assign(net.exit_count(), 0.0);
      } else {
        cfg.strategy = trainkit::strategy_from_name(label);
      }

      ConvergenceRecord record;
      record.strategy = label;
      record.seed = seed;
      record.init_fingerprint = fingerprint;
      trainkit::train(net, data, cfg, [&](long) {
        record.loss_per_iteration.push_back(final_exit_loss(net, data));
      });
      const long total = static_cast<long>(record.loss_per_iteration.size());
      record.iterations_to_target = total + 1;
      for (long t = 0; t < total; ++t) {
        if (record.loss_per_iteration[t] <= target_loss) {
          record.iterations_to_target = t + 1;
          break;
        }
      }
      records.push_back(std::move(record));
    }
  }
  return records;
}

void save_convergence_csv(const std::vector<ConvergenceRecord>& records,
                          const std::string& path) {
  CsvWriter w(path, {"strategy", "seed", "iteration", "loss"});
  for (const auto& r : records) {
    for (std::size_t t = 0; t < r.loss_per_iteration.size(); ++t) {
      w.row({r.strategy, std::to_string(r.seed), std::to_string(t + 1),
             fmt_double(r.loss_per_iteration[t])});
    }
  }
}

}  // namespace multiexit::diagkit
