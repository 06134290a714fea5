#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "multiexit/cli/datasets.hpp"
#include "multiexit/cli/experiment.hpp"
#include "multiexit/numcore/optimizer.hpp"
#include "multiexit/numcore/ops.hpp"
#include "multiexit/trainkit/train.hpp"
#include "test_util.hpp"

using namespace multiexit;
using namespace multiexit::cli;
namespace fs = std::filesystem;

namespace {

// One-layer softmax classifier accuracy, the linear baseline.
double linear_baseline_accuracy(const Dataset& data, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto blocks = exitnet::make_dense_backbone(data.feature_dim, {}, data.class_count, rng);
  exitnet::MultiExitNetwork net(std::move(blocks), data.class_count);
  trainkit::TrainingConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.5;
  cfg.seed = seed;
  trainkit::train_joint(net, data, cfg);
  const auto metrics = trainkit::evaluate_metrics(net, data);
  return metrics.accuracy.back();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// metrics.csv minus its wall-clock column (the one nondeterministic cell).
std::string metrics_without_wall(const fs::path& p) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    out += line.substr(0, cut);
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("mixture: fully easy data is linearly separable") {
  const auto data = generate_mixture_dataset(600, 1.0, 4, 1);
  CHECK(linear_baseline_accuracy(data, 2) >= 0.99);
}

TEST_CASE("mixture: fully hard data defeats the linear baseline") {
  const auto data = generate_mixture_dataset(600, 0.0, 4, 1);
  CHECK(linear_baseline_accuracy(data, 2) <= 0.70);
}

TEST_CASE("mixture: deterministic and balanced") {
  const auto a = generate_mixture_dataset(1001, 0.8, 3, 9);
  const auto b = generate_mixture_dataset(1001, 0.8, 3, 9);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);

  std::vector<long> counts(3, 0);
  for (int y : a.labels) ++counts[y];
  const long lo = *std::min_element(counts.begin(), counts.end());
  const long hi = *std::max_element(counts.begin(), counts.end());
  CHECK(hi - lo <= 1 + static_cast<long>(0.01 * 1001));

  CHECK_THROWS_AS(generate_mixture_dataset(2, 0.5, 4, 0), ConfigError);
}

TEST_CASE("tabular loader: exact values from a hand-written file") {
  const auto path = fs::temp_directory_path() / "multiexit_tab_test.csv";
  {
    std::ofstream out(path);
    out << "x,y,label\n";
    out << "0.5,-1.25,0\n";
    out << "3,4.5,1\n";
    out << "-2,0.125,1\n";
    out << "7,8,0\n";
  }
  const auto data = load_tabular_csv(path.string());
  CHECK(data.feature_dim == 2);
  CHECK(data.class_count == 2);
  REQUIRE(data.size() == 4);
  CHECK(data.features == std::vector<double>{0.5, -1.25, 3, 4.5, -2, 0.125, 7, 8});
  CHECK(data.labels == std::vector<int>{0, 1, 1, 0});
  fs::remove(path);
}

TEST_CASE("tabular loader: ragged and malformed rows name their line") {
  const auto path = fs::temp_directory_path() / "multiexit_tab_bad.csv";
  {
    std::ofstream out(path);
    out << "x,y,label\n";
    out << "1,2,0\n";
    out << "3,4\n";  // line 3: ragged
  }
  try {
    load_tabular_csv(path.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "x,y,label\n";
    out << "1,zebra,0\n";
  }
  CHECK_THROWS_AS(load_tabular_csv(path.string()), ParseError);
  {
    std::ofstream out(path);
    out << "x,y,label\n";
    out << "1,2,-3\n";
  }
  CHECK_THROWS_AS(load_tabular_csv(path.string()), ParseError);
  fs::remove(path);
}

TEST_CASE("splits honor 70/15/15 within one sample") {
  for (long n : {100L, 101L, 997L}) {
    const auto data = generate_mixture_dataset(n, 0.5, 2, 4);
    const auto split = split_dataset(data, 17);
    CHECK(static_cast<long>(split.train.size() + split.validation.size() + split.test.size()) ==
          n);
    CHECK(std::abs(static_cast<long>(split.train.size()) - std::lround(0.7 * n)) <= 1);
    CHECK(std::abs(static_cast<long>(split.validation.size()) - std::lround(0.15 * n)) <= 1);
  }
}

TEST_CASE("dataset CSV round-trips bit-exactly") {
  const auto data = generate_mixture_dataset(200, 0.6, 3, 5);
  const auto path = fs::temp_directory_path() / "multiexit_ds_roundtrip.csv";
  save_dataset_csv(data, path.string());
  const auto loaded = load_tabular_csv(path.string());
  CHECK(loaded.features == data.features);
  CHECK(loaded.labels == data.labels);
  fs::remove(path);
}

TEST_CASE("config: unknown keys are rejected at every level") {
  nlohmann::json raw{{"output_dir", "x"}, {"bogus", 1}};
  CHECK_THROWS_AS(ExperimentConfig::parse(raw), ConfigError);
  raw = {{"output_dir", "x"}, {"dataset", {{"generator", "mixture"}, {"typo_key", 3}}}};
  CHECK_THROWS_AS(ExperimentConfig::parse(raw), ConfigError);
  raw = {{"output_dir", "x"}, {"stages", {"fly"}}};
  CHECK_THROWS_AS(ExperimentConfig::parse(raw), ConfigError);
  raw = {{"dataset", {{"generator", "mixture"}}}};
  CHECK_THROWS_AS(ExperimentConfig::parse(raw), ConfigError);  // missing output_dir
}

TEST_CASE("config: a resolved document re-parses to itself") {
  nlohmann::json raw{{"output_dir", "x"}, {"seed", 4}, {"dataset", {{"n", 50}}}};
  const auto once = ExperimentConfig::parse(raw);
  const auto twice = ExperimentConfig::parse(once.doc());
  CHECK(once.doc() == twice.doc());
  CHECK(once.fingerprint() == twice.fingerprint());
}

TEST_CASE("config: fingerprint changes exactly with the config") {
  nlohmann::json raw{{"output_dir", "x"}, {"seed", 1}, {"dataset", {{"n", 100}}}};
  const auto a = ExperimentConfig::parse(raw);
  const auto b = ExperimentConfig::parse(raw);
  CHECK(a.fingerprint() == b.fingerprint());
  raw["dataset"]["n"] = 101;
  const auto c = ExperimentConfig::parse(raw);
  CHECK(a.fingerprint() != c.fingerprint());
  // Defaults are echoed, so the resolved document pins every parameter.
  CHECK(a.doc().at("dataset").contains("easy_fraction"));
  CHECK(a.doc().at("training").contains("learning_rate"));
}

TEST_CASE("dataset-only experiments write only the dataset artifact") {
  const auto dir = fresh_dir("multiexit_exp_dataset_only");
  nlohmann::json raw{{"output_dir", dir.string()},
                     {"seed", 3},
                     {"dataset", {{"generator", "mixture"}, {"n", 64L}, {"classes", 2}}}};
  const auto result = run_experiment(ExperimentConfig::parse(raw));
  CHECK(fs::exists(dir / "dataset.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK_FALSE(fs::exists(dir / "model.json"));
  CHECK_FALSE(fs::exists(dir / "metrics.csv"));
  CHECK(result.artifacts == std::vector<std::string>{"dataset.csv", "manifest.json"});
  fs::remove_all(dir);
}

TEST_CASE("full small pipeline runs and reruns bit-identically") {
  nlohmann::json raw{
      {"seed", 11},
      {"output_dir", ""},
      {"dataset", {{"generator", "mixture"}, {"n", 240L}, {"classes", 3}, {"easy_fraction", 0.7}}},
      {"model", {{"hidden_dims", {8, 8}}, {"placement", {2, 4}}}},
      {"training",
       {{"strategy", "joint"}, {"epochs", 3L}, {"batch_size", 32}, {"learning_rate", 0.2}}},
      {"calibration", {{"mode", "per_exit"}, {"budget", 0.02}}},
      {"policy", {{"kind", "entropy"}, {"beta", "calibrated"}}},
      {"topology",
       {{"tiers", {{{"name", "edge"}, {"compute_rate", 50.0}}, {{"name", "cloud"}, {"compute_rate", 500.0}}}},
        {"links", {{{"latency_ms", 2.0}, {"bandwidth", 64.0}}}},
        {"partition", {0, 0, 0, 1, 1, 1}}}},
      {"diagnostics", {{"ib_bins", 8}}}};

  const auto dir_a = fresh_dir("multiexit_exp_a");
  raw["output_dir"] = dir_a.string();
  const auto res_a = run_experiment(ExperimentConfig::parse(raw));
  for (const auto& name : {"dataset.csv", "metrics.csv", "model.json", "model.ckpt",
                           "calibration.json", "ledger.csv", "simreport.csv", "ibplane.csv",
                           "manifest.json"}) {
    CHECK(fs::exists(dir_a / name));
  }

  const auto dir_b = fresh_dir("multiexit_exp_b");
  raw["output_dir"] = dir_b.string();
  run_experiment(ExperimentConfig::parse(raw));

  for (const auto& name : {"dataset.csv", "model.ckpt", "calibration.json", "ledger.csv",
                           "simreport.csv", "ibplane.csv"}) {
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }
  // The metrics file carries wall-clock timings in its last column; all
  // other cells must match.
  CHECK(metrics_without_wall(dir_a / "metrics.csv") == metrics_without_wall(dir_b / "metrics.csv"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("stage failures name the stage and keep earlier artifacts") {
  const auto dir = fresh_dir("multiexit_exp_fail");
  nlohmann::json raw{
      {"seed", 1},
      {"output_dir", dir.string()},
      {"stages", {"dataset", "train", "simulate"}},
      {"dataset", {{"generator", "mixture"}, {"n", 64L}, {"classes", 2}}},
      {"model", {{"hidden_dims", {4}}, {"placement", {2}}}},
      {"training", {{"epochs", 1L}, {"batch_size", 32}, {"learning_rate", 0.1}}}};
  // simulate without a topology section must fail by name.
  try {
    run_experiment(ExperimentConfig::parse(raw));
    FAIL("expected failure");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("simulate") != std::string::npos);
  }
  CHECK(fs::exists(dir / "dataset.csv"));
  CHECK(fs::exists(dir / "model.json"));
  fs::remove_all(dir);
}

TEST_CASE("output root env var redirects relative outputs") {
  const auto root = fresh_dir("multiexit_exp_root");
  setenv(kOutputRootEnv, root.c_str(), 1);
  nlohmann::json raw{{"output_dir", "nested/run1"},
                     {"seed", 2},
                     {"dataset", {{"generator", "mixture"}, {"n", 32L}, {"classes", 2}}}};
  run_experiment(ExperimentConfig::parse(raw));
  CHECK(fs::exists(root / "nested/run1/dataset.csv"));
  unsetenv(kOutputRootEnv);
  fs::remove_all(root);
}
