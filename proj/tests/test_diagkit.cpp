#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "multiexit/cli/datasets.hpp"
#include "multiexit/diagkit/convergence.hpp"
#include "multiexit/diagkit/ib_plane.hpp"
#include "multiexit/diagkit/mutual_information.hpp"
#include "test_util.hpp"

using namespace multiexit;
using namespace multiexit::diagkit;

namespace {

Samples uniform_samples(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Samples::column(v);
}

}  // namespace

TEST_CASE("identity four-symbol channel carries two bits") {
  std::mt19937_64 rng(0);
  std::uniform_int_distribution<int> sym(0, 3);
  std::vector<int> a(10000);
  for (auto& v : a) v = sym(rng);
  const double mi = estimate_mutual_information(Samples::column(a), Samples::column(a), 16);
  CHECK(mi == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("independent draws carry almost nothing") {
  std::mt19937_64 rng(1);
  const auto a = uniform_samples(rng, 10000);
  const auto b = uniform_samples(rng, 10000);
  CHECK(estimate_mutual_information(a, b, 16) < 0.05);
}

TEST_CASE("deterministic sign readout carries one bit") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(10000);
  std::vector<double> y(10000);
  for (int i = 0; i < 10000; ++i) {
    x[i] = gauss(rng);
    y[i] = x[i] >= 0.0 ? 1.0 : -1.0;
  }
  const double mi =
      estimate_mutual_information(Samples::column(x), Samples::column(y), 16);
  CHECK(mi == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("estimator is symmetric and nonnegative") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = uniform_samples(rng, 2000);
    auto b = uniform_samples(rng, 2000);
    // Correlate b with a to give the estimate something to find.
    for (int i = 0; i < 2000; ++i) b.values[i] = 0.5 * b.values[i] + 0.5 * a.values[i];
    const double ab = estimate_mutual_information(a, b, 12);
    const double ba = estimate_mutual_information(b, a, 12);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) < 1e-9);
  }
}

TEST_CASE("constant inputs score zero") {
  Samples a = Samples::column(std::vector<double>(500, 3.25));
  std::mt19937_64 rng(4);
  const auto b = uniform_samples(rng, 500);
  CHECK(estimate_mutual_information(a, b, 8) == 0.0);
  CHECK_THROWS_AS(estimate_mutual_information(a, uniform_samples(rng, 400), 8), ContractError);
  CHECK_THROWS_AS(estimate_mutual_information(a, Samples::column(std::vector<double>(500, 1.0)), 1),
                  ContractError);
}

TEST_CASE("data-processing sanity on a constructed chain") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 10000;
  std::vector<double> x(n), f(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = gauss(rng);
    f[i] = std::tanh(2.0 * x[i]) + 0.1 * gauss(rng);
    y[i] = f[i] >= 0.0 ? 1.0 : 0.0;
  }
  const double ixy = estimate_mutual_information(Samples::column(x), Samples::column(y), 16);
  const double ixf = estimate_mutual_information(Samples::column(x), Samples::column(f), 16);
  CHECK(ixy <= ixf + 0.1);
}

TEST_CASE("principal projection keeps the dominant direction") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 4000;
  Samples x;
  x.rows = n;
  x.cols = 5;
  x.values.resize(static_cast<std::size_t>(n) * 5);
  for (int i = 0; i < n; ++i) {
    const double big = 10.0 * gauss(rng);
    for (int c = 0; c < 5; ++c) {
      x.values[static_cast<std::size_t>(i) * 5 + c] = 0.1 * gauss(rng) + (c == 2 ? big : 0.0);
    }
  }
  const auto projected = principal_projection(x, 2);
  REQUIRE(projected.cols == 2);
  // First component carries far more variance than the second.
  double var0 = 0.0, var1 = 0.0;
  for (int i = 0; i < n; ++i) {
    var0 += projected.at(i, 0) * projected.at(i, 0);
    var1 += projected.at(i, 1) * projected.at(i, 1);
  }
  CHECK(var0 > 50.0 * var1);
}

TEST_CASE("information plane: constant embeddings sit at the origin") {
  std::mt19937_64 rng(7);
  auto backbone = exitnet::make_dense_backbone(2, {5, 5}, 2, rng);
  exitnet::MultiExitNetwork net =
      exitnet::MultiExitNetwork::attach_exits(std::move(backbone), {2}, {}, 2, rng);
  // Zero every weight: embeddings become constant zero.
  for (auto& b : net.backbone()) {
    if (b.has_params()) {
      std::fill(b.weight->data().begin(), b.weight->data().end(), 0.0);
      std::fill(b.bias->data().begin(), b.bias->data().end(), 0.0);
    }
  }
  const auto data = cli::generate_mixture_dataset(500, 0.5, 2, 3);
  const auto points = ib_plane(net, data, 16);
  CHECK(points[0].mi_input_bits == 0.0);
  CHECK(points[0].mi_label_bits == 0.0);
}

TEST_CASE("information plane: an accurate final exit recovers the label entropy") {
  const auto data = cli::generate_mixture_dataset(2000, 1.0, 2, 8);
  std::mt19937_64 rng(9);
  auto backbone = exitnet::make_dense_backbone(2, {8}, 2, rng);
  exitnet::MultiExitNetwork net =
      exitnet::MultiExitNetwork::attach_exits(std::move(backbone), {2}, {}, 2, rng);
  trainkit::TrainingConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.3;
  cfg.seed = 10;
  trainkit::train_joint(net, data, cfg);

  const auto points = ib_plane(net, data, 16);
  // Label entropy of a balanced two-class set is one bit.
  const double label_bits = points.back().mi_label_bits;
  CHECK(label_bits > 0.8);
  CHECK(label_bits <= 1.0 + 0.05);

  const auto again = ib_plane(net, data, 16);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].mi_input_bits == again[i].mi_input_bits);
    CHECK(points[i].mi_label_bits == again[i].mi_label_bits);
  }
}

TEST_CASE("convergence: zero-weight joint and standard trace identical curves") {
  const auto data = cli::generate_mixture_dataset(128, 0.8, 2, 12);
  auto factory = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto backbone = exitnet::make_dense_backbone(2, {6, 6}, 2, rng);
    return exitnet::MultiExitNetwork::attach_exits(std::move(backbone), {2}, {}, 2, rng);
  };
  trainkit::TrainingConfig base;
  base.epochs = 2;
  base.batch_size = 32;
  base.learning_rate = 0.2;

  trainkit::TrainingConfig zero_joint = base;
  // "standard" and an explicit zero-weight joint run must coincide.
  auto records_a = convergence_compare(factory, data, {"standard"}, 0.4, {1, 2}, zero_joint);
  trainkit::TrainingConfig explicit_zero = base;
  explicit_zero.exit_loss_weights = {0.0};
  explicit_zero.strategy = trainkit::Strategy::Joint;
  auto records_b = convergence_compare(factory, data, {"joint"}, 0.4, {1, 2}, explicit_zero);
  for (std::size_t i = 0; i < records_a.size(); ++i) {
    CHECK(records_a[i].loss_per_iteration == records_b[i].loss_per_iteration);
    CHECK(records_a[i].iterations_to_target == records_b[i].iterations_to_target);
  }
}

TEST_CASE("convergence: reruns are identical and inits are fingerprint-paired") {
  const auto data = cli::generate_mixture_dataset(128, 0.8, 2, 13);
  auto factory = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto backbone = exitnet::make_dense_backbone(2, {6, 6}, 2, rng);
    return exitnet::MultiExitNetwork::attach_exits(std::move(backbone), {2}, {}, 2, rng);
  };
  trainkit::TrainingConfig base;
  base.epochs = 2;
  base.batch_size = 32;
  base.learning_rate = 0.2;

  const auto once = convergence_compare(factory, data, {"standard", "joint"}, 0.4, {7}, base);
  const auto twice = convergence_compare(factory, data, {"standard", "joint"}, 0.4, {7}, base);
  REQUIRE(once.size() == 2);
  CHECK(once[0].init_fingerprint == once[1].init_fingerprint);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(once[i].loss_per_iteration == twice[i].loss_per_iteration);
  }
  // A sentinel of total+1 marks "never reached".
  const auto hopeless = convergence_compare(factory, data, {"standard"}, -1.0, {7}, base);
  CHECK(hopeless[0].iterations_to_target ==
        static_cast<long>(hopeless[0].loss_per_iteration.size()) + 1);
}
