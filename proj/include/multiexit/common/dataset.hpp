#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "multiexit/common/errors.hpp"

namespace multiexit {

// Row-major labeled sample table shared by every module. Feature rows are
// contiguous; labels are class indices in [0, class_count).
struct Dataset {
  int feature_dim = 0;
  int class_count = 0;
  std::vector<double> features;  // size() * feature_dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }

  void push_row(std::span<const double> x, int label) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.feature_dim = feature_dim;
    out.class_count = class_count;
    out.features.reserve(indices.size() * feature_dim);
    out.labels.reserve(indices.size());
    for (auto i : indices) {
      if (i >= size()) throw IndexError("dataset subset index out of range");
      out.push_row(row(i), labels[i]);
    }
    return out;
  }
};

}  // namespace multiexit
