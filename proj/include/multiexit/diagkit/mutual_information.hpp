#pragma once

#include <vector>

#include "multiexit/common/errors.hpp"

namespace multiexit::diagkit {

// Column-major-free sample matrix: `rows` samples of `cols` features.
struct Samples {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  static Samples column(const std::vector<double>& v);
  static Samples column(const std::vector<int>& v);
};

// Plug-in binned mutual information in bits. Inputs wider than two
// columns are first reduced to their two leading principal directions;
// each remaining dimension is split into `bins` equal-width cells. The
// estimate is clamped at zero, and constant inputs score zero.
double estimate_mutual_information(const Samples& a, const Samples& b, int bins);

// Top `count` principal directions via cyclic Jacobi on the covariance;
// returns the projected samples.
Samples principal_projection(const Samples& x, int count);

}  // namespace multiexit::diagkit
