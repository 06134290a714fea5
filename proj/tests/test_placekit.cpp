#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>

#include "multiexit/inferkit/adaptive.hpp"
#include "multiexit/placekit/placement.hpp"
#include "test_util.hpp"

using namespace multiexit;
using namespace multiexit::placekit;
using exitnet::MultiExitNetwork;
using numcore::Block;

namespace {

CostProfile make_profile(std::vector<double> block_cost, std::vector<double> head_cost,
                         std::vector<double> reach) {
  CostProfile p;
  p.block_cost = std::move(block_cost);
  p.head_cost = std::move(head_cost);
  p.reach_fraction = std::move(reach);
  return p;
}

CostProfile random_profile(std::mt19937_64& rng, int depth) {
  std::uniform_real_distribution<double> cost(1.0, 100.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CostProfile p;
  p.block_cost.resize(depth);
  p.head_cost.resize(depth);
  p.reach_fraction.resize(depth);
  for (int i = 0; i < depth; ++i) {
    p.block_cost[i] = cost(rng);
    p.head_cost[i] = cost(rng) * 0.2;
  }
  p.reach_fraction[0] = 1.0;
  for (int i = 1; i < depth; ++i) {
    p.reach_fraction[i] = p.reach_fraction[i - 1] * unit(rng);
  }
  return p;
}

Dataset noise_dataset(std::mt19937_64& rng, int n) {
  Dataset data;
  data.feature_dim = 2;
  data.class_count = 2;
  std::uniform_real_distribution<double> dist(-1, 1);
  for (int i = 0; i < n; ++i) {
    data.features.push_back(dist(rng));
    data.features.push_back(dist(rng));
    data.labels.push_back(i % 2);
  }
  return data;
}

}  // namespace

TEST_CASE("static profile: dense and identity block costs") {
  std::mt19937_64 rng(0);
  std::vector<Block> blocks{Block::dense(10, 5, rng), Block::identity(5), Block::dense(5, 3, rng),
                            Block::softmax_output(3)};
  MultiExitNetwork net(std::move(blocks), 3);
  const auto p = static_cost_profile(net);
  CHECK(p.block_cost[0] == 50.0);  // 10*5 multiply-accumulates
  CHECK(p.block_cost[1] == 0.0);   // identity is free
  CHECK(p.block_cost[2] == 15.0);
  CHECK(p.block_cost[3] == 3.0);   // activation, one op per output
  CHECK(p.cumulative(4) == 68.0);
}

TEST_CASE("static profile sums match a per-element operation recount") {
  std::mt19937_64 rng(1);
  std::vector<Block> blocks{Block::dense(7, 4, rng), Block::relu(4), Block::dense(4, 3, rng),
                            Block::softmax_output(3)};
  MultiExitNetwork net(std::move(blocks), 3);
  const auto p = static_cost_profile(net);
  // Independent recount from the actual parameter tensor shapes.
  double recount = 0.0;
  for (const auto& b : net.backbone()) {
    if (b.has_params()) {
      recount += static_cast<double>(b.weight->shape()[0]) * b.weight->shape()[1];
    } else if (b.kind != numcore::BlockKind::Identity) {
      recount += b.out_dim;
    }
  }
  CHECK(p.total() == recount);
}

TEST_CASE("efficiency test: published boundary cases") {
  // Cumulative costs (1,2) with everything exiting early.
  auto p = make_profile({1, 1}, {0.1, 0}, {1.0, 0.0});
  CHECK(efficiency_test(p, 1));
  // A useless exit: nothing stops there.
  auto q = make_profile({1, 1, 1}, {0.1, 0.1, 0}, {1.0, 0.5, 0.5});
  CHECK_FALSE(efficiency_test(q, 2));
}

TEST_CASE("efficiency test matches direct re-evaluation on random profiles") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_profile(rng, 6);
    for (int i = 1; i < 6; ++i) {
      double gamma_i = 0.0;
      for (int k = 0; k < i; ++k) gamma_i += p.block_cost[k];
      const double gamma_next = gamma_i + p.block_cost[i];
      const bool expect = (gamma_next - gamma_i) * (p.reach_fraction[i - 1] - p.reach_fraction[i]) >
                          gamma_i * p.reach_fraction[i];
      CHECK(efficiency_test(p, i) == expect);
    }
  }
}

TEST_CASE("greedy: TH=1 keeps an exit iff the head beats the next block") {
  // cm < 1 everywhere; the rule reduces to gamma_f_{i+1} >= gamma_c_i.
  auto p = make_profile({10, 20, 30}, {5, 50, 0}, {1.0, 0.5, 0.25});
  const auto plan = greedy_placement(p, 1.0);
  REQUIRE(plan.decisions.size() == 2);
  CHECK(plan.decisions[0].kept);        // head 5 cheaper than block 20
  CHECK_FALSE(plan.decisions[1].kept);  // head 50 dearer than block 30
}

TEST_CASE("greedy: cm=1 drops the exit for TH<1") {
  auto p = make_profile({10, 20}, {1, 0}, {1.0, 1.0});
  for (double th : {0.0, 0.3, 0.7, 0.99}) {
    const auto plan = greedy_placement(p, th);
    CHECK_FALSE(plan.decisions[0].kept);
  }
}

TEST_CASE("greedy decisions match independent rule re-evaluation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_profile(rng, 7);
    for (double th : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto plan = greedy_placement(p, th);
      for (const auto& d : plan.decisions) {
        const int i = d.index;
        const double reach_i = p.reach_fraction[i - 1];
        const double cm = reach_i > 0.0 ? p.reach_fraction[i] / reach_i : 1.0;
        const double lhs = (th - cm) * p.block_cost[i] - (1.0 - cm) * p.head_cost[i - 1] -
                           (1.0 - th) * p.block_cost[i - 1];
        CHECK(d.kept == (lhs >= 0.0));
        CHECK(d.lhs == doctest::Approx(lhs).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("greedy determinism: identical inputs, identical plans") {
  std::mt19937_64 rng(4);
  const auto p = random_profile(rng, 8);
  const auto a = greedy_placement(p, 0.6);
  const auto b = greedy_placement(p, 0.6);
  CHECK(a.chosen == b.chosen);
}

TEST_CASE("exhaustive: no exits allowed means the full-depth cost") {
  std::mt19937_64 rng(5);
  const auto p = random_profile(rng, 6);
  const auto r = exhaustive_placement(p, 0);
  CHECK(r.chosen.empty());
  CHECK(r.cost == doctest::Approx(p.total()).epsilon(1e-12));
}

TEST_CASE("exhaustive: hand-enumerable three-layer case prefers {1}") {
  // Exit 1 halves traffic at negligible head cost.
  auto p = make_profile({10, 10, 10}, {0.1, 0.1, 0}, {1.0, 0.5, 0.5});
  CHECK(expected_cascade_cost(p, {}) == doctest::Approx(30.0));
  CHECK(expected_cascade_cost(p, {1}) == doctest::Approx(0.5 * 10.1 + 0.5 * 30.1));
  CHECK(expected_cascade_cost(p, {1, 2}) == doctest::Approx(0.5 * 10.1 + 0.5 * 30.2));
  const auto r = exhaustive_placement(p, -1);
  CHECK(r.chosen == std::vector<int>{1});
}

TEST_CASE("exhaustive dominates greedy across the TH grid") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_profile(rng, 8);
    const auto best = exhaustive_placement(p, -1);
    for (int g = 0; g <= 10; ++g) {
      const auto plan = greedy_placement(p, g / 10.0);
      CHECK(best.cost <= expected_cascade_cost(p, plan.chosen) + 1e-9);
    }
  }
}

TEST_CASE("exhaustive refuses absurd depths") {
  CostProfile p;
  p.block_cost.assign(25, 1.0);
  p.head_cost.assign(25, 1.0);
  p.reach_fraction.assign(25, 1.0);
  CHECK_THROWS_AS(exhaustive_placement(p, -1), ContractError);
}

TEST_CASE("percentile: uniform nine-block profile lands on thirds") {
  auto p = make_profile(std::vector<double>(9, 1.0), std::vector<double>(9, 1.0),
                        std::vector<double>(9, 1.0));
  const auto chosen = percentile_placement(p, {1.0 / 3.0, 2.0 / 3.0});
  CHECK(chosen == std::vector<int>{3, 6});
  CHECK(percentile_placement(p, {1e-9}) == std::vector<int>{1});
}

TEST_CASE("percentile: returned cumulative cost brackets the request") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_profile(rng, 9);
    for (double pct : {0.2, 0.5, 0.8}) {
      const auto chosen = percentile_placement(p, {pct});
      REQUIRE(chosen.size() == 1);
      const int i = chosen[0];
      CHECK(p.cumulative(i) >= pct * p.total());
      if (i > 1) CHECK(p.cumulative(i - 1) < pct * p.total());
    }
  }
}

TEST_CASE("TH monotonicity: kept sets grow with TH when compression is real") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    auto p = random_profile(rng, 7);
    // Force cm_i < 1 everywhere.
    for (int i = 1; i < 7; ++i) {
      p.reach_fraction[i] = std::min(p.reach_fraction[i], p.reach_fraction[i - 1] * 0.95);
    }
    std::vector<int> previous;
    for (int g = 0; g <= 10; ++g) {
      const auto plan = greedy_placement(p, g / 10.0);
      for (int kept : previous) {
        CHECK(std::find(plan.chosen.begin(), plan.chosen.end(), kept) != plan.chosen.end());
      }
      previous = plan.chosen;
    }
  }
}

TEST_CASE("cumulative cost is strictly increasing for positive block costs") {
  std::mt19937_64 rng(9);
  const auto p = random_profile(rng, 10);
  for (int i = 1; i <= 10; ++i) CHECK(p.cumulative(i) > p.cumulative(i - 1));
}

TEST_CASE("wall-clock multipliers rescale block costs") {
  std::mt19937_64 rng(20);
  const auto p = random_profile(rng, 4);
  const auto scaled = scaled_profile(p, {2.0, 1.0, 0.5, 3.0});
  CHECK(scaled.block_cost[0] == doctest::Approx(2.0 * p.block_cost[0]));
  CHECK(scaled.block_cost[2] == doctest::Approx(0.5 * p.block_cost[2]));
  CHECK(scaled.head_cost == p.head_cost);
  CHECK_THROWS_AS(scaled_profile(p, {1.0}), ContractError);
  CHECK_THROWS_AS(scaled_profile(p, {1.0, -1.0, 1.0, 1.0}), ContractError);
}

TEST_CASE("profile CSV round-trips") {
  std::mt19937_64 rng(10);
  const auto p = random_profile(rng, 5);
  const auto path = std::filesystem::temp_directory_path() / "multiexit_profile_test.csv";
  save_profile_csv(p, path.string());
  const auto q = load_profile_csv(path.string());
  CHECK(p.block_cost == q.block_cost);
  CHECK(p.head_cost == q.head_cost);
  CHECK(p.reach_fraction == q.reach_fraction);
  std::filesystem::remove(path);
}

TEST_CASE("measured fractions: policies and the ledger recount agree") {
  std::mt19937_64 rng(11);
  auto backbone = exitnet::make_dense_backbone(2, {4, 4}, 2, rng);
  auto net = MultiExitNetwork::attach_exits(std::move(backbone), {2, 4}, {}, 2, rng);
  const auto data = noise_dataset(rng, 40);

  const auto reach = measure_exit_fractions(net, inferkit::ExitPolicy::always_final(), data);
  for (double r : reach) CHECK(r == 1.0);

  // Everything stops at the first exit under beta = 1.
  const auto reach1 = measure_exit_fractions(net, inferkit::ExitPolicy::entropy(1.0), data);
  for (int i = 0; i < net.depth(); ++i) {
    CHECK(reach1[i] == (i < net.attach_index(0) ? 1.0 : 0.0));
  }

  // Recount oracle from the raw ledger.
  const auto policy = inferkit::ExitPolicy::entropy(0.9);
  const auto result = inferkit::run_adaptive_inference(net, policy, data);
  const auto reach2 = measure_exit_fractions(net, policy, data);
  std::vector<double> recount(net.depth(), 0.0);
  for (std::size_t s = 0; s < data.size(); ++s) {
    const int j = result.ledger.exit_ordinal[s];
    const int last = j < net.exit_count() ? net.attach_index(j) : net.depth();
    for (int b = 0; b < last; ++b) recount[b] += 1.0 / static_cast<double>(data.size());
  }
  for (int b = 0; b < net.depth(); ++b) CHECK(reach2[b] == doctest::Approx(recount[b]));
}

TEST_CASE("constant-beatable heads are pruned") {
  std::mt19937_64 rng(12);
  auto backbone = exitnet::make_dense_backbone(2, {4}, 2, rng);
  auto net = MultiExitNetwork::attach_exits(std::move(backbone), {1, 2}, {}, 2, rng);
  const auto data = noise_dataset(rng, 60);
  // Untrained random heads cannot beat the majority class by half a point
  // on balanced noise.
  const auto kept = prune_constant_beatable(net, data, 0.005);
  CHECK(kept.size() <= 1);
}
