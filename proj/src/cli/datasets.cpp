#include "multiexit/cli/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "multiexit/common/csv.hpp"

namespace multiexit::cli {

namespace {
constexpr double kTau = 6.28318530717958647692;
}

Dataset generate_mixture_dataset(long n, double easy_fraction, int classes, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("mixture needs at least 2 classes");
  if (n < classes) throw ConfigError("mixture needs at least one sample per class");
  if (easy_fraction < 0.0 || easy_fraction > 1.0) {
    throw ConfigError("easy fraction must lie in [0,1]");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Balanced class counts (difference at most one sample).
  std::vector<long> count(classes, n / classes);
  for (long r = 0; r < n % classes; ++r) ++count[r];

  Dataset data;
  data.feature_dim = 2;
  data.class_count = classes;
  data.features.reserve(2 * n);
  data.labels.reserve(n);

  for (int k = 0; k < classes; ++k) {
    const long easy = std::lround(easy_fraction * static_cast<double>(count[k]));
    const double angle = kTau * k / classes;
    for (long s = 0; s < count[k]; ++s) {
      double x, y;
      if (s < easy) {
        // Distant Gaussian island per class.
        x = 6.0 * std::cos(angle) + 0.5 * gauss(rng);
        y = 6.0 * std::sin(angle) + 0.5 * gauss(rng);
      } else {
        // Concentric ring per class; radii interleave too tightly for a
        // linear separator.
        const double radius = 0.8 + 0.5 * k + 0.08 * gauss(rng);
        const double theta = kTau * unif(rng);
        x = radius * std::cos(theta);
        y = radius * std::sin(theta);
      }
      data.features.push_back(x);
      data.features.push_back(y);
      data.labels.push_back(k);
    }
  }

  // Seeded order shuffle so batches mix classes and difficulty.
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return data.subset(order);
}

SplitDataset split_dataset(const Dataset& all, std::uint64_t seed) {
  const long n = static_cast<long>(all.size());
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const long n_train = std::lround(0.70 * static_cast<double>(n));
  const long n_val = std::lround(0.15 * static_cast<double>(n));
  SplitDataset split;
  split.train = all.subset({order.begin(), order.begin() + n_train});
  split.validation = all.subset({order.begin() + n_train, order.begin() + n_train + n_val});
  split.test = all.subset({order.begin() + n_train + n_val, order.end()});
  return split;
}

Dataset load_tabular_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset: " + path);

  Dataset data;
  std::string line;
  long line_no = 0;
  long width = -1;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.size() < 2) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": header needs at least one feature column and a label");
      }
      width = static_cast<long>(cells.size());
      data.feature_dim = static_cast<int>(width - 1);
      have_header = true;
      continue;
    }
    if (static_cast<long>(cells.size()) != width) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " columns, got " + std::to_string(cells.size()));
    }
    for (long c = 0; c + 1 < width; ++c) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
        data.features.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric feature '" +
                         cells[c] + "'");
      }
    }
    try {
      std::size_t used = 0;
      const long label = std::stol(cells[width - 1], &used);
      if (used != cells[width - 1].size() || label < 0) {
        throw std::invalid_argument(cells[width - 1]);
      }
      data.labels.push_back(static_cast<int>(label));
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": label must be a nonnegative integer");
    }
  }
  if (!have_header) throw ParseError(path + ": missing header row");
  data.class_count = 0;
  for (int y : data.labels) data.class_count = std::max(data.class_count, y + 1);
  if (data.class_count < 2) throw ParseError(path + ": need at least two classes");
  return data;
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::vector<std::string> header;
  for (int c = 0; c < data.feature_dim; ++c) header.push_back("f" + std::to_string(c));
  header.push_back("label");
  CsvWriter w(path, header);
  std::vector<std::string> cells(data.feature_dim + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.row(i);
    for (int c = 0; c < data.feature_dim; ++c) cells[c] = fmt_double(row[c]);
    cells[data.feature_dim] = std::to_string(data.labels[i]);
    w.row(cells);
  }
}

}  // namespace multiexit::cli
