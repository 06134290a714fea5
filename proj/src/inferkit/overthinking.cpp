#include "multiexit/inferkit/overthinking.hpp"

#include <algorithm>

namespace multiexit::inferkit {

OverthinkReport overthinking_report(const exitnet::MultiExitNetwork& net, const Dataset& data) {
  OverthinkReport report;
  const int k = net.exit_count();
  report.correct_here_wrong_later.assign(k, 0);
  report.wrong_here_correct_later.assign(k, 0);
  report.sample_count = static_cast<long>(data.size());

  long overthought = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto trace = net.eval_all_exits(data.row(s), /*with_gates=*/false);
    const auto& f = trace.final_prediction;
    const bool final_ok =
        static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin()) == data.labels[s];
    bool any_early_ok = false;
    for (int j = 0; j < k; ++j) {
      const auto& p = trace.predictions[j];
      const bool here_ok =
          static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == data.labels[s];
      if (here_ok && !final_ok) ++report.correct_here_wrong_later[j];
      if (!here_ok && final_ok) ++report.wrong_here_correct_later[j];
      any_early_ok = any_early_ok || here_ok;
    }
    if (any_early_ok && !final_ok) ++overthought;
  }
  if (report.sample_count > 0) {
    report.overthinking_rate =
        static_cast<double>(overthought) / static_cast<double>(report.sample_count);
  }
  return report;
}

}  // namespace multiexit::inferkit
