#pragma once

#include <string>
#include <vector>

#include "multiexit/common/dataset.hpp"
#include "multiexit/diagkit/mutual_information.hpp"
#include "multiexit/exitnet/network.hpp"

namespace multiexit::diagkit {

// One information-plane coordinate pair per exit embedding: estimated
// I(X; F_i) and I(Y; F_i) in bits, with the estimator settings used.
// Measurement only; nothing here feeds back into training.
struct IbPoint {
  int exit_ordinal = 0;  // exit_count() for the final exit
  int attach_index = 0;  // backbone depth for the final exit
  double mi_input_bits = 0.0;
  double mi_label_bits = 0.0;
  int bins = 0;
  long sample_count = 0;
};

std::vector<IbPoint> ib_plane(const exitnet::MultiExitNetwork& net, const Dataset& data, int bins);

// CSV columns: exit, attach, I_X, I_Y, bins, n.
void save_ib_points_csv(const std::vector<IbPoint>& points, const std::string& path);

}  // namespace multiexit::diagkit
