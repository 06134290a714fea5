#pragma once

#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/exitnet/network.hpp"

namespace multiexit::inferkit {

// Per-exit tally of samples an early head classifies correctly while the
// final exit gets them wrong (and the mirror count). The aggregate rate is
// the share of samples over-thought at any exit.
struct OverthinkReport {
  std::vector<long> correct_here_wrong_later;
  std::vector<long> wrong_here_correct_later;
  long sample_count = 0;
  double overthinking_rate = 0.0;
};

OverthinkReport overthinking_report(const exitnet::MultiExitNetwork& net, const Dataset& data);

}  // namespace multiexit::inferkit
