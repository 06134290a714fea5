#pragma once

#include <cstdint>
#include <string>

#include "multiexit/common/dataset.hpp"

namespace multiexit::cli {

// Two-dimensional class mixture: an easy share drawn from well-separated
// Gaussians (linearly separable by a wide margin) and a hard share drawn
// from interleaved concentric rings that defeat linear classifiers. Class
// counts are balanced to within one sample and the result is a pure
// function of its arguments.
Dataset generate_mixture_dataset(long n, double easy_fraction, int classes, std::uint64_t seed);

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Seeded shuffle, then 70/15/15 within one sample of the exact
// proportions.
SplitDataset split_dataset(const Dataset& all, std::uint64_t seed);

// CSV with a header row, features first, integer label last. Parse
// failures name the offending line.
Dataset load_tabular_csv(const std::string& path);
void save_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace multiexit::cli
