#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <filesystem>

#include "multiexit/exitnet/model_io.hpp"
#include "multiexit/exitnet/network.hpp"
#include "test_util.hpp"

using namespace multiexit;
using namespace multiexit::exitnet;
using numcore::Block;
using numcore::Tensor;

namespace {

MultiExitNetwork make_random_net(std::mt19937_64& rng, const std::vector<int>& placement,
                                 const HeadSpec& spec = {}) {
  auto backbone = make_dense_backbone(3, {6, 6, 6}, 4, rng);  // 8 blocks
  return MultiExitNetwork::attach_exits(std::move(backbone), placement, spec, 4, rng);
}

std::vector<double> sample(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> dist(-1, 1);
  std::vector<double> x(dim);
  for (auto& v : x) v = dist(rng);
  return x;
}

}  // namespace

TEST_CASE("empty exit set: trace holds only the final prediction") {
  std::mt19937_64 rng(0);
  auto net = make_random_net(rng, {});
  const auto trace = net.eval_all_exits(std::vector<double>{0.1, 0.2, 0.3});
  CHECK(trace.predictions.empty());
  CHECK(trace.final_prediction.size() == 4);
  CHECK(trace.blocks_evaluated == net.depth());
}

TEST_CASE("identity backbone with identical heads emits identical predictions") {
  std::mt19937_64 rng(1);
  std::vector<Block> blocks{Block::identity(2), Block::identity(2), Block::dense(2, 2, rng),
                            Block::softmax_output(2)};
  auto net = MultiExitNetwork::attach_exits(std::move(blocks), {1, 2}, {}, 2, rng);
  // Copy exit 0's parameters into exit 1.
  for (std::size_t l = 0; l < net.exits()[0].layers.size(); ++l) {
    if (net.exits()[0].layers[l].has_params()) {
      net.exits()[1].layers[l].weight->data() = net.exits()[0].layers[l].weight->data();
      net.exits()[1].layers[l].bias->data() = net.exits()[0].layers[l].bias->data();
    }
  }
  const auto trace = net.eval_all_exits(std::vector<double>{0.3, -0.7});
  REQUIRE(trace.predictions.size() == 2);
  CHECK(trace.predictions[0] == trace.predictions[1]);
}

TEST_CASE("exit predictions match independent composition of blocks") {
  std::mt19937_64 rng(2);
  auto net = make_random_net(rng, {2, 4, 6});
  const auto x = sample(rng, 3);
  const auto trace = net.eval_all_exits(x);
  for (int j = 0; j < net.exit_count(); ++j) {
    // Re-run blocks 1..attach and the head by hand.
    std::vector<double> h(x);
    for (int i = 1; i <= net.attach_index(j); ++i) h = net.backbone()[i - 1].eval(h, 1);
    const auto manual = net.eval_head(j, h, 1);
    for (std::size_t c = 0; c < manual.size(); ++c) {
      CHECK(trace.predictions[j][c] == doctest::Approx(manual[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward_until: counting contract and full-depth equivalence") {
  std::mt19937_64 rng(3);
  auto net = make_random_net(rng, {2, 5});
  const auto x = sample(rng, 3);

  const auto at_first = net.eval_until(x, 0);
  CHECK(at_first.blocks_evaluated == net.attach_index(0));

  const auto full = net.eval_until(x, net.exit_count());
  CHECK(full.blocks_evaluated == net.depth());
  const auto trace = net.eval_all_exits(x);
  CHECK(full.prediction == trace.final_prediction);

  for (int j = 0; j < net.exit_count(); ++j) {
    const auto until = net.eval_until(x, j);
    REQUIRE(until.prediction.size() == trace.predictions[j].size());
    for (std::size_t c = 0; c < until.prediction.size(); ++c) {
      CHECK(std::abs(until.prediction[c] - trace.predictions[j][c]) < 1e-12);
    }
  }
}

TEST_CASE("forward_until: unknown ordinal is a contract error") {
  std::mt19937_64 rng(4);
  auto net = make_random_net(rng, {2});
  CHECK_THROWS_AS(net.eval_until(std::vector<double>{0, 0, 0}, 5), ContractError);
}

TEST_CASE("attach_exits: empty placement behaves like the plain backbone") {
  std::mt19937_64 rng(5);
  auto backbone = make_dense_backbone(3, {6}, 2, rng);
  std::mt19937_64 rng_heads(6);
  auto net = MultiExitNetwork::attach_exits(std::move(backbone), {}, {}, 2, rng_heads);
  CHECK(net.exit_count() == 0);
  const auto x = sample(rng, 3);
  const auto trace = net.eval_all_exits(x);
  CHECK(trace.final_prediction == net.eval_until(x, 0).prediction);
}

TEST_CASE("attach_exits: one exit per block is accepted") {
  std::mt19937_64 rng(6);
  auto backbone = make_dense_backbone(3, {6, 6}, 2, rng);
  const int depth = static_cast<int>(backbone.size());
  std::vector<int> everywhere;
  for (int i = 1; i < depth; ++i) everywhere.push_back(i);
  auto net = MultiExitNetwork::attach_exits(std::move(backbone), everywhere, {}, 2, rng);
  CHECK(net.exit_count() == depth - 1);
  const auto trace = net.eval_all_exits(sample(rng, 3));
  CHECK(static_cast<int>(trace.predictions.size()) == depth - 1);
}

TEST_CASE("attach_exits: rejects bad placements") {
  std::mt19937_64 rng(7);
  auto make = [&](const std::vector<int>& placement) {
    auto backbone = make_dense_backbone(3, {6, 6}, 2, rng);
    MultiExitNetwork::attach_exits(std::move(backbone), placement, {}, 2, rng);
  };
  CHECK_THROWS_AS(make({2, 2}), PlacementError);   // duplicate
  CHECK_THROWS_AS(make({3, 2}), PlacementError);   // not increasing
  CHECK_THROWS_AS(make({0}), PlacementError);      // out of range
  CHECK_THROWS_AS(make({99}), PlacementError);     // out of range
}

TEST_CASE("attach then detach leaves backbone outputs bit-identical") {
  std::mt19937_64 rng(8);
  auto backbone = make_dense_backbone(3, {6, 6}, 2, rng);
  MultiExitNetwork plain(std::move(backbone), 2);
  const auto x = sample(rng, 3);
  const auto before = plain.eval_until(x, 0).prediction;

  std::vector<Block> shared = plain.backbone();  // shares parameter tensors
  auto with_exits = MultiExitNetwork::attach_exits(std::move(shared), {1, 3}, {}, 2, rng);
  auto detached = with_exits.detach_exits();
  CHECK(detached.exit_count() == 0);
  const auto after = detached.eval_until(x, 0).prediction;
  CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
}

TEST_CASE("sharing invariant: one backbone pass per trace") {
  std::mt19937_64 rng(9);
  auto net = make_random_net(rng, {1, 2, 3, 4, 5, 6, 7});
  const auto trace = net.eval_all_exits(sample(rng, 3));
  CHECK(trace.blocks_evaluated == net.depth());
  auto x = numcore::Tensor::make({1, 3}, sample(rng, 3));
  const auto graph_trace = net.forward_all_exits(x);
  CHECK(graph_trace.blocks_evaluated == net.depth());
}

TEST_CASE("simplex invariant: every prediction is a probability vector") {
  std::mt19937_64 rng(10);
  auto net = make_random_net(rng, {2, 4});
  for (int trial = 0; trial < 25; ++trial) {
    const auto trace = net.eval_all_exits(sample(rng, 3));
    auto check_simplex = [](const std::vector<double>& p) {
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    };
    for (const auto& p : trace.predictions) check_simplex(p);
    check_simplex(trace.final_prediction);
  }
}

TEST_CASE("graph and eval paths agree bitwise") {
  std::mt19937_64 rng(11);
  auto net = make_random_net(rng, {2, 4});
  const auto x = sample(rng, 3);
  const auto eval_trace = net.eval_all_exits(x);
  const auto graph_trace = net.forward_all_exits(Tensor::make({3}, x));
  for (int j = 0; j < net.exit_count(); ++j) {
    CHECK(graph_trace.predictions[j]->data() == eval_trace.predictions[j]);
  }
  CHECK(graph_trace.final_prediction->data() == eval_trace.final_prediction);
}

TEST_CASE("gates stay strictly inside (0,1)") {
  std::mt19937_64 rng(12);
  auto net = make_random_net(rng, {2, 4});
  net.add_gates(rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto trace = net.eval_all_exits(sample(rng, 3));
    REQUIRE(trace.gate_values.size() == 2);
    for (double g : trace.gate_values) {
      CHECK(g > 0.0);
      CHECK(g < 1.0);
    }
  }
}

TEST_CASE("two-layer heads and pooled heads forward correctly") {
  std::mt19937_64 rng(13);
  HeadSpec spec;
  spec.hidden_dim = 5;
  spec.average_pool_to = 3;
  auto net = make_random_net(rng, {2, 4}, spec);
  const auto trace = net.eval_all_exits(sample(rng, 3));
  for (const auto& p : trace.predictions) CHECK(p.size() == 4);
}

TEST_CASE("model description + checkpoint round-trip preserves outputs bit-exactly") {
  std::mt19937_64 rng(14);
  auto net = make_random_net(rng, {2, 5});
  net.add_gates(rng);
  const auto dir = std::filesystem::temp_directory_path() / "multiexit_model_test";
  std::filesystem::create_directories(dir);
  save_model(net, (dir / "model.json").string(), "model.ckpt");
  const auto loaded = load_model((dir / "model.json").string());

  std::mt19937_64 xrng(15);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = sample(xrng, 3);
    const auto a = net.eval_all_exits(x);
    const auto b = loaded.eval_all_exits(x);
    CHECK(a.final_prediction == b.final_prediction);
    for (int j = 0; j < net.exit_count(); ++j) CHECK(a.predictions[j] == b.predictions[j]);
    CHECK(a.gate_values == b.gate_values);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("head gradients flow into the shared backbone") {
  std::mt19937_64 rng(16);
  auto net = make_random_net(rng, {2});
  auto x = Tensor::make({1, 3}, sample(rng, 3));
  const auto trace = net.forward_all_exits(x);
  const auto loss = numcore::ops::cross_entropy(trace.predictions[0], {1});
  numcore::backward(loss);
  // Blocks up to the attach point have gradients; later blocks do not.
  CHECK(net.backbone()[0].weight->has_grad());
  bool later_has = false;
  for (int i = net.attach_index(0); i < net.depth(); ++i) {
    if (net.backbone()[i].has_params() && net.backbone()[i].weight->has_grad()) later_has = true;
  }
  CHECK_FALSE(later_has);
}
