#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "multiexit/tiersim/simulate.hpp"
#include "test_util.hpp"

using namespace multiexit;
using namespace multiexit::tiersim;
using exitnet::MultiExitNetwork;
using numcore::Block;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MultiExitNetwork two_block_net(std::mt19937_64& rng) {
  // dense(1,100) and softmax(100): 100 operations each.
  std::vector<Block> blocks{Block::dense(1, 100, rng), Block::softmax_output(100)};
  return MultiExitNetwork(std::move(blocks), 100);
}

MultiExitNetwork exit_net(std::mt19937_64& rng, std::vector<int> placement = {2, 4}) {
  auto backbone = exitnet::make_dense_backbone(3, {8, 8}, 4, rng);
  return MultiExitNetwork::attach_exits(std::move(backbone), placement, {}, 4, rng);
}

TierTopology uniform_topology(int tiers, int depth, double rate, double latency) {
  TierTopology topo;
  for (int t = 0; t < tiers; ++t) topo.tiers.push_back({"t" + std::to_string(t), rate});
  for (int t = 0; t + 1 < tiers; ++t) topo.links.push_back({latency, kInf});
  topo.partition.resize(depth);
  for (int b = 0; b < depth; ++b) {
    topo.partition[b] = std::min(tiers - 1, b * tiers / depth);
  }
  return topo;
}

}  // namespace

TEST_CASE("single tier: latency is exactly compute over rate") {
  std::mt19937_64 rng(0);
  auto net = exit_net(rng);
  auto topo = uniform_topology(1, net.depth(), 50.0, 0.0);
  const std::vector<int> exits(10, net.exit_count());
  const auto report = simulate(net, topo, exits);
  double expected = 0.0;
  for (const auto& b : net.backbone()) expected += b.mac_cost() / 50.0;
  CHECK(report.mean_latency_ms == doctest::Approx(expected).epsilon(1e-12));
  CHECK(report.per_exit_latency.back() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("exiting before the first boundary pays no link cost") {
  std::mt19937_64 rng(1);
  auto net = exit_net(rng, {2, 4});
  TierTopology topo;
  topo.tiers = {{"edge", 10.0}, {"cloud", 100.0}};
  topo.links = {{7.5, 100.0}};
  // Blocks 1..3 on the edge, 4..6 in the cloud; exit 0 attaches at block 2.
  topo.partition = {0, 0, 0, 1, 1, 1};
  const auto report = simulate(net, topo, {0, 0, 0});
  CHECK(report.per_exit_latency[0] == doctest::Approx(report.per_exit_compute[0]).epsilon(1e-12));
  CHECK(report.link_values[0] == 0.0);
}

TEST_CASE("hand-computed two-tier case: 1 + 5 + 1 milliseconds") {
  std::mt19937_64 rng(2);
  auto net = two_block_net(rng);
  TierTopology topo;
  topo.tiers = {{"edge", 100.0}, {"cloud", 100.0}};
  topo.links = {{5.0, kInf}};
  topo.partition = {0, 1};
  const auto report = simulate(net, topo, {0});
  CHECK(report.latency_ms[0] == 7.0);
  CHECK(report.mean_latency_ms == 7.0);
}

TEST_CASE("conservation: transferred values equal width times crossings") {
  std::mt19937_64 rng(3);
  auto net = exit_net(rng, {2, 4});
  TierTopology topo;
  topo.tiers = {{"a", 10.0}, {"b", 20.0}, {"c", 40.0}};
  topo.links = {{1.0, 50.0}, {2.0, 25.0}};
  topo.partition = {0, 0, 1, 1, 2, 2};
  // Exits: ordinal 0 stops at block 2 (tier a), ordinal 1 at block 4
  // (tier b), final crosses both links.
  const std::vector<int> exits{0, 0, 1, 2, 2, 2, 1, 0};
  const auto report = simulate(net, topo, exits);
  long cross_first = 0, cross_second = 0;
  for (int j : exits) {
    if (j >= 1) ++cross_first;   // reaches tier b
    if (j >= 2) ++cross_second;  // reaches tier c
  }
  const double width_first = net.backbone()[1].out_dim;   // boundary block 2
  const double width_second = net.backbone()[3].out_dim;  // boundary block 4
  CHECK(report.link_values[0] == cross_first * width_first);
  CHECK(report.link_values[1] == cross_second * width_second);
}

TEST_CASE("zero-communication topology collapses to pure compute") {
  std::mt19937_64 rng(4);
  auto net = exit_net(rng, {2, 4});
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> rate(1.0, 100.0);
    TierTopology topo;
    topo.tiers = {{"a", rate(rng)}, {"b", rate(rng)}, {"c", rate(rng)}};
    topo.links = {{0.0, kInf}, {0.0, kInf}};
    topo.partition = {0, 0, 1, 1, 2, 2};
    const std::vector<int> exits{0, 1, 2, 2, 1, 0};
    const auto report = simulate(net, topo, exits);
    for (int j = 0; j <= net.exit_count(); ++j) {
      const int last = j < net.exit_count() ? net.attach_index(j) : net.depth();
      double compute = 0.0;
      for (int b = 1; b <= last; ++b) {
        compute += net.backbone()[b - 1].mac_cost() / topo.tiers[topo.partition[b - 1]].compute_rate;
      }
      CHECK(std::abs(report.per_exit_latency[j] - compute) < 1e-9);
    }
  }
}

TEST_CASE("locality: more first-tier exits never slow the mean down") {
  std::mt19937_64 rng(5);
  auto net = exit_net(rng, {2, 4});
  auto topo = uniform_topology(2, net.depth(), 25.0, 3.0);
  const int n = 100;
  double previous = std::numeric_limits<double>::infinity();
  for (int early = 0; early <= n; early += 10) {
    std::vector<int> exits;
    for (int i = 0; i < n; ++i) exits.push_back(i < early ? 0 : net.exit_count());
    const auto report = simulate(net, topo, exits);
    CHECK(report.mean_latency_ms <= previous + 1e-12);
    previous = report.mean_latency_ms;
  }
}

TEST_CASE("totals: mean cost equals mean latency; parts sum to the whole") {
  std::mt19937_64 rng(6);
  auto net = exit_net(rng, {2, 4});
  TierTopology topo;
  topo.tiers = {{"a", 10.0}, {"b", 30.0}};
  topo.links = {{0.5, 64.0}};
  topo.partition = {0, 0, 0, 1, 1, 1};
  std::uniform_int_distribution<int> pick(0, net.exit_count());
  std::vector<int> exits;
  for (int i = 0; i < 50; ++i) exits.push_back(pick(rng));
  const auto report = simulate(net, topo, exits);
  CHECK(std::abs(report.mean_cost - report.mean_latency_ms) < 1e-9);
  double weighted = 0.0;
  for (int j = 0; j <= net.exit_count(); ++j) {
    weighted += report.exit_fraction[j] * report.per_exit_latency[j];
  }
  CHECK(std::abs(weighted - report.mean_latency_ms) < 1e-9);
  CHECK(report.p50_ms <= report.p95_ms);
  CHECK(report.p95_ms <= report.p99_ms);
}

TEST_CASE("partition comparison: identical candidates tie, lag never helps") {
  std::mt19937_64 rng(7);
  auto net = exit_net(rng, {2, 4});
  auto base = uniform_topology(2, net.depth(), 25.0, 1.0);
  auto slower = base;
  slower.links[0].latency_ms += 10.0;

  std::uniform_int_distribution<int> pick(0, net.exit_count());
  std::vector<int> exits;
  for (int i = 0; i < 40; ++i) exits.push_back(pick(rng));

  const auto tie = compare_partitions(net, {base, base}, exits);
  CHECK(tie.ranked[0].mean_latency_ms == tie.ranked[1].mean_latency_ms);

  const auto ranked = compare_partitions(net, {slower, base}, exits);
  CHECK(ranked.ranked[0].candidate == 1);  // the un-lagged one wins

  // Deterministic re-run.
  const auto again = compare_partitions(net, {slower, base}, exits);
  CHECK(again.ranked[0].candidate == ranked.ranked[0].candidate);
  CHECK(again.ranked[0].mean_latency_ms == ranked.ranked[0].mean_latency_ms);

  CHECK_THROWS_AS(compare_partitions(net, {base}, exits), ContractError);
}

TEST_CASE("topology validation catches bad structure") {
  std::mt19937_64 rng(8);
  auto net = exit_net(rng, {2, 4});
  TierTopology topo = uniform_topology(2, net.depth(), 25.0, 1.0);

  auto gap = topo;
  gap.partition.pop_back();
  CHECK_THROWS_AS(gap.validate(net.depth()), TopologyError);

  auto backwards = topo;
  backwards.partition = {1, 1, 0, 0, 1, 1};
  CHECK_THROWS_AS(backwards.validate(net.depth()), TopologyError);

  auto dead = topo;
  dead.tiers[0].compute_rate = 0.0;
  CHECK_THROWS_AS(dead.validate(net.depth()), TopologyError);

  auto choked = topo;
  choked.links[0].bandwidth = 0.0;
  CHECK_THROWS_AS(choked.validate(net.depth()), TopologyError);
}

TEST_CASE("topology JSON round-trips, including unlimited bandwidth") {
  TierTopology topo;
  topo.tiers = {{"edge", 12.5}, {"fog", 80.0}, {"cloud", 400.0}};
  topo.links = {{2.0, 128.0}, {9.0, kInf}};
  topo.partition = {0, 0, 1, 2};
  topo.bytes_per_value = 2.0;
  const auto path = std::filesystem::temp_directory_path() / "multiexit_topo_test.json";
  save_topology_json(topo, path.string());
  const auto loaded = load_topology_json(path.string());
  CHECK(loaded.tiers.size() == 3);
  CHECK(loaded.tiers[1].compute_rate == 80.0);
  CHECK(loaded.links[0].bandwidth == 128.0);
  CHECK(std::isinf(loaded.links[1].bandwidth));
  CHECK(loaded.partition == topo.partition);
  CHECK(loaded.bytes_per_value == 2.0);
  std::filesystem::remove(path);
}

TEST_CASE("byte-rate links are converted through bytes_per_value") {
  const auto path = std::filesystem::temp_directory_path() / "multiexit_topo_bytes.json";
  {
    std::ofstream out(path);
    out << R"({"bytes_per_value": 4.0,
               "tiers": [{"name":"a","compute_rate":10}, {"name":"b","compute_rate":10}],
               "links": [{"latency_ms":1.0,"bandwidth_bytes":400.0}],
               "partition": [0,1]})";
  }
  const auto topo = load_topology_json(path.string());
  CHECK(topo.links[0].bandwidth == doctest::Approx(100.0));
  std::filesystem::remove(path);
}

TEST_CASE("per-tier energy scales with the coefficients") {
  std::mt19937_64 rng(9);
  auto net = exit_net(rng, {2, 4});
  auto topo = uniform_topology(2, net.depth(), 25.0, 1.0);
  const std::vector<int> exits(10, net.exit_count());
  const std::vector<double> coeffs{2.0, 0.5};
  const auto plain = simulate(net, topo, exits);
  const auto scaled = simulate(net, topo, exits, &coeffs);
  CHECK(scaled.tier_energy[0] == doctest::Approx(2.0 * plain.tier_energy[0]));
  CHECK(scaled.tier_energy[1] == doctest::Approx(0.5 * plain.tier_energy[1]));
}
