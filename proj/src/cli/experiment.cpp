#include "multiexit/cli/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "multiexit/cli/datasets.hpp"
#include "multiexit/common/csv.hpp"
#include "multiexit/common/hash.hpp"
#include "multiexit/diagkit/convergence.hpp"
#include "multiexit/diagkit/ib_plane.hpp"
#include "multiexit/exitnet/model_io.hpp"
#include "multiexit/inferkit/adaptive.hpp"
#include "multiexit/inferkit/calibrate.hpp"
#include "multiexit/placekit/placement.hpp"
#include "multiexit/tiersim/simulate.hpp"
#include "multiexit/trainkit/local_feedback.hpp"

namespace multiexit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

const std::vector<std::string> kStageOrder = {"dataset", "placement", "train", "calibrate",
                                              "infer",   "simulate",  "diagnose"};

json resolve_dataset(const json& raw) {
  require_keys(raw, "dataset", {"generator", "n", "easy_fraction", "classes", "path"});
  json out;
  if (raw.contains("path")) {
    out["path"] = raw.at("path").get<std::string>();
    return out;
  }
  const std::string gen = raw.value("generator", "mixture");
  if (gen != "mixture") throw ConfigError("unknown dataset generator: " + gen);
  out["generator"] = gen;
  out["n"] = raw.value("n", 1000L);
  out["easy_fraction"] = raw.value("easy_fraction", 0.8);
  out["classes"] = raw.value("classes", 2);
  return out;
}

json resolve_model(const json& raw) {
  require_keys(raw, "model",
               {"hidden_dims", "placement", "head_hidden", "head_pool", "gates"});
  json out;
  out["hidden_dims"] = raw.value("hidden_dims", std::vector<int>{16, 16});
  out["placement"] = raw.contains("placement") ? raw.at("placement") : json("auto");
  out["head_hidden"] = raw.value("head_hidden", 0);
  out["head_pool"] = raw.value("head_pool", 0);
  out["gates"] = raw.value("gates", false);
  return out;
}

json resolve_placement(const json& raw) {
  require_keys(raw, "placement",
               {"strategy", "percentiles", "th", "max_exits", "pretrain_epochs", "measure_beta"});
  json out;
  const std::string strategy = raw.value("strategy", "percentile");
  if (strategy != "percentile" && strategy != "greedy" && strategy != "exhaustive") {
    throw ConfigError("unknown placement strategy: " + strategy);
  }
  out["strategy"] = strategy;
  out["percentiles"] = raw.value("percentiles", std::vector<double>{1.0 / 3.0, 2.0 / 3.0});
  out["th"] = raw.value("th", 0.7);
  out["max_exits"] = raw.value("max_exits", -1);
  out["pretrain_epochs"] = raw.value("pretrain_epochs", 3L);
  out["measure_beta"] = raw.value("measure_beta", 0.5);
  return out;
}

json resolve_training(const json& raw) {
  require_keys(raw, "training",
               {"strategy", "epochs", "batch_size", "learning_rate", "alphas", "linear_alphas",
                "combo_mode", "combo_weights", "freeze_points", "exit_costs", "cost_strength"});
  json out;
  out["strategy"] = raw.value("strategy", "joint");
  trainkit::strategy_from_name(out["strategy"].get<std::string>());
  out["epochs"] = raw.value("epochs", 10L);
  out["batch_size"] = raw.value("batch_size", 32);
  out["learning_rate"] = raw.value("learning_rate", 0.1);
  out["alphas"] = raw.value("alphas", std::vector<double>{});
  out["linear_alphas"] = raw.value("linear_alphas", false);
  out["combo_mode"] = raw.value("combo_mode", "softmax_normalized");
  out["combo_weights"] = raw.value("combo_weights", std::vector<double>{});
  out["freeze_points"] = raw.value("freeze_points", std::vector<long>{});
  out["exit_costs"] = raw.value("exit_costs", std::vector<double>{});
  out["cost_strength"] = raw.value("cost_strength", 0.0);
  return out;
}

json resolve_calibration(const json& raw) {
  require_keys(raw, "calibration", {"mode", "budget", "target", "mu", "max_iters"});
  json out;
  const std::string mode = raw.value("mode", "per_exit");
  if (mode != "per_exit" && mode != "single") throw ConfigError("unknown calibration mode: " + mode);
  out["mode"] = mode;
  out["budget"] = raw.value("budget", 0.01);
  out["target"] = raw.value("target", 0.9);
  out["mu"] = raw.value("mu", 1.0);
  out["max_iters"] = raw.value("max_iters", 200L);
  return out;
}

json resolve_policy(const json& raw) {
  require_keys(raw, "policy", {"kind", "beta", "cutoff", "fixed"});
  json out;
  out["kind"] = raw.value("kind", "entropy");
  inferkit::policy_kind_from_name(out["kind"].get<std::string>());
  out["beta"] = raw.contains("beta") ? raw.at("beta") : json("calibrated");
  out["cutoff"] = raw.value("cutoff", 0.5);
  out["fixed"] = raw.value("fixed", 0);
  return out;
}

json resolve_topology(const json& raw) {
  if (raw.contains("path")) {
    require_keys(raw, "topology", {"path"});
    return raw;
  }
  require_keys(raw, "topology", {"tiers", "links", "partition", "bytes_per_value"});
  json out = raw;
  if (!out.contains("bytes_per_value")) out["bytes_per_value"] = 4.0;
  return out;
}

json resolve_diagnostics(const json& raw) {
  require_keys(raw, "diagnostics", {"ib_bins", "convergence"});
  json out;
  out["ib_bins"] = raw.value("ib_bins", 16);
  if (raw.contains("convergence")) {
    const auto& c = raw.at("convergence");
    require_keys(c, "diagnostics.convergence", {"strategies", "target_loss", "seeds"});
    json conv;
    conv["strategies"] = c.value("strategies", std::vector<std::string>{"joint", "standard"});
    conv["target_loss"] = c.value("target_loss", 0.5);
    conv["seeds"] = c.value("seeds", std::vector<std::uint64_t>{1, 2, 3});
    out["convergence"] = std::move(conv);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const json& raw) {
  // schema_version is accepted so a resolved document re-parses cleanly.
  require_keys(raw, "config",
               {"schema_version", "seed", "output_dir", "stages", "dataset", "model", "placement",
                "training", "calibration", "policy", "topology", "diagnostics"});
  if (raw.contains("schema_version") && raw.at("schema_version").get<int>() != 1) {
    throw ConfigError("unsupported config schema version");
  }
  if (!raw.contains("output_dir")) throw ConfigError("config needs an output_dir");

  ExperimentConfig cfg;
  cfg.doc_["schema_version"] = 1;
  cfg.doc_["seed"] = raw.value("seed", 0UL);
  cfg.doc_["output_dir"] = raw.at("output_dir").get<std::string>();

  std::vector<std::string> stages;
  if (raw.contains("stages")) {
    stages = raw.at("stages").get<std::vector<std::string>>();
    for (const auto& s : stages) {
      if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end()) {
        throw ConfigError("unknown stage: " + s);
      }
    }
  } else {
    // Default: one stage per configured section.
    if (raw.contains("dataset")) stages.push_back("dataset");
    if (raw.contains("placement")) stages.push_back("placement");
    if (raw.contains("training")) stages.push_back("train");
    if (raw.contains("calibration")) stages.push_back("calibrate");
    if (raw.contains("policy")) stages.push_back("infer");
    if (raw.contains("topology")) stages.push_back("simulate");
    if (raw.contains("diagnostics")) stages.push_back("diagnose");
  }
  cfg.doc_["stages"] = stages;

  cfg.doc_["dataset"] = resolve_dataset(raw.value("dataset", json::object()));
  cfg.doc_["model"] = resolve_model(raw.value("model", json::object()));
  cfg.doc_["placement"] = resolve_placement(raw.value("placement", json::object()));
  cfg.doc_["training"] = resolve_training(raw.value("training", json::object()));
  cfg.doc_["calibration"] = resolve_calibration(raw.value("calibration", json::object()));
  cfg.doc_["policy"] = resolve_policy(raw.value("policy", json::object()));
  if (raw.contains("topology")) cfg.doc_["topology"] = resolve_topology(raw.at("topology"));
  cfg.doc_["diagnostics"] = resolve_diagnostics(raw.value("diagnostics", json::object()));
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  json raw;
  try {
    in >> raw;
  } catch (const json::exception& e) {
    throw ParseError("config parse failure in " + path + ": " + e.what());
  }
  return parse(raw);
}

std::uint64_t ExperimentConfig::seed() const { return doc_.at("seed").get<std::uint64_t>(); }

void ExperimentConfig::override_seed(std::uint64_t seed) { doc_["seed"] = seed; }

std::string ExperimentConfig::output_dir() const {
  return doc_.at("output_dir").get<std::string>();
}

bool ExperimentConfig::stage_enabled(const std::string& name) const {
  const auto& stages = doc_.at("stages");
  return std::find(stages.begin(), stages.end(), json(name)) != stages.end();
}

std::uint64_t ExperimentConfig::fingerprint() const { return hash_string(doc_.dump()); }

namespace {

struct PipelineState {
  Dataset all;
  SplitDataset split;
  bool have_data = false;
  std::vector<int> placement;
  exitnet::MultiExitNetwork net;
  bool have_net = false;
  std::vector<double> calibrated_beta;
  bool have_calibration = false;
  inferkit::AdaptiveResult inference;
  bool have_inference = false;
};

trainkit::TrainingConfig training_config(const json& t, std::uint64_t seed) {
  trainkit::TrainingConfig cfg;
  cfg.strategy = trainkit::strategy_from_name(t.at("strategy").get<std::string>());
  cfg.epochs = t.at("epochs").get<long>();
  cfg.batch_size = t.at("batch_size").get<int>();
  cfg.learning_rate = t.at("learning_rate").get<double>();
  cfg.exit_loss_weights = t.at("alphas").get<std::vector<double>>();
  cfg.linear_exit_weights = t.at("linear_alphas").get<bool>();
  const std::string mode = t.at("combo_mode").get<std::string>();
  if (mode == "fixed") {
    cfg.combo_mode = trainkit::ComboMode::Fixed;
  } else if (mode == "trainable") {
    cfg.combo_mode = trainkit::ComboMode::Trainable;
  } else if (mode == "softmax_normalized") {
    cfg.combo_mode = trainkit::ComboMode::SoftmaxNormalized;
  } else {
    throw ConfigError("unknown combo mode: " + mode);
  }
  cfg.combo_weights = t.at("combo_weights").get<std::vector<double>>();
  cfg.freeze_points = t.at("freeze_points").get<std::vector<long>>();
  cfg.exit_costs = t.at("exit_costs").get<std::vector<double>>();
  cfg.cost_strength = t.at("cost_strength").get<double>();
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

void ensure_data(const ExperimentConfig& cfg, PipelineState& state) {
  if (state.have_data) return;
  const auto& d = cfg.doc().at("dataset");
  if (d.contains("path")) {
    state.all = load_tabular_csv(d.at("path").get<std::string>());
  } else {
    state.all = generate_mixture_dataset(d.at("n").get<long>(), d.at("easy_fraction").get<double>(),
                                         d.at("classes").get<int>(), cfg.seed());
  }
  state.split = split_dataset(state.all, trainkit::derive_seed(cfg.seed(), 11));
  state.have_data = true;
}

bool needs_gates(const ExperimentConfig& cfg) {
  if (cfg.doc().at("model").at("gates").get<bool>()) return true;
  const auto strategy = cfg.doc().at("training").at("strategy").get<std::string>();
  if (strategy == "gated_recursive" || strategy == "cost_regularized") return true;
  return cfg.doc().at("policy").at("kind").get<std::string>() == "learned_gate";
}

exitnet::MultiExitNetwork build_net(const ExperimentConfig& cfg, const PipelineState& state,
                                    const std::vector<int>& placement, std::uint64_t seed) {
  const auto& m = cfg.doc().at("model");
  std::mt19937_64 rng(seed);
  auto backbone = exitnet::make_dense_backbone(state.all.feature_dim,
                                               m.at("hidden_dims").get<std::vector<int>>(),
                                               state.all.class_count, rng);
  exitnet::HeadSpec head;
  head.hidden_dim = m.at("head_hidden").get<int>();
  head.average_pool_to = m.at("head_pool").get<int>();
  auto net = exitnet::MultiExitNetwork::attach_exits(std::move(backbone), placement, head,
                                                     state.all.class_count, rng);
  if (needs_gates(cfg)) net.add_gates(rng);
  return net;
}

std::vector<int> resolve_placement(const ExperimentConfig& cfg, PipelineState& state,
                                   const fs::path& out, std::vector<std::string>& artifacts) {
  const auto& m = cfg.doc().at("model");
  const auto& p = cfg.doc().at("placement");
  ensure_data(cfg, state);

  // Explicit indices win unless the placement stage is enabled.
  if (!cfg.stage_enabled("placement")) {
    if (m.at("placement").is_array()) return m.at("placement").get<std::vector<int>>();
    // "auto" without a placement stage: percentile thirds.
    std::mt19937_64 rng(cfg.seed());
    auto backbone = exitnet::make_dense_backbone(state.all.feature_dim,
                                                 m.at("hidden_dims").get<std::vector<int>>(),
                                                 state.all.class_count, rng);
    exitnet::MultiExitNetwork shell(std::move(backbone), state.all.class_count);
    const auto profile = placekit::static_cost_profile(shell);
    return placekit::percentile_placement(profile, {1.0 / 3.0, 2.0 / 3.0});
  }

  const std::string strategy = p.at("strategy").get<std::string>();
  std::mt19937_64 rng(trainkit::derive_seed(cfg.seed(), 77));
  auto backbone = exitnet::make_dense_backbone(state.all.feature_dim,
                                               m.at("hidden_dims").get<std::vector<int>>(),
                                               state.all.class_count, rng);

  placekit::CostProfile profile;
  std::vector<int> chosen;
  json decisions = json::array();
  if (strategy == "percentile") {
    exitnet::MultiExitNetwork shell(std::move(backbone), state.all.class_count);
    profile = placekit::static_cost_profile(shell);
    chosen = placekit::percentile_placement(profile, p.at("percentiles").get<std::vector<double>>());
  } else {
    // Fully-exited probe net, briefly trained, measures who exits where;
    // the rule then prunes the exit set.
    std::vector<int> everywhere;
    for (int i = 1; i < static_cast<int>(backbone.size()); ++i) everywhere.push_back(i);
    exitnet::HeadSpec head;
    head.hidden_dim = m.at("head_hidden").get<int>();
    auto probe = exitnet::MultiExitNetwork::attach_exits(std::move(backbone), everywhere, head,
                                                         state.all.class_count, rng);
    trainkit::TrainingConfig probe_cfg = training_config(cfg.doc().at("training"), cfg.seed());
    probe_cfg.strategy = trainkit::Strategy::Joint;
    probe_cfg.epochs = p.at("pretrain_epochs").get<long>();
    trainkit::train_joint(probe, state.split.train, probe_cfg);
    profile = placekit::measured_cost_profile(
        probe, inferkit::ExitPolicy::entropy(p.at("measure_beta").get<double>()),
        state.split.validation);
    if (strategy == "greedy") {
      const auto plan = placekit::greedy_placement(profile, p.at("th").get<double>());
      chosen = plan.chosen;
      for (const auto& d : plan.decisions) {
        decisions.push_back({{"index", d.index}, {"kept", d.kept}, {"lhs", d.lhs}});
      }
    } else {
      const auto result = placekit::exhaustive_placement(profile, p.at("max_exits").get<int>());
      chosen = result.chosen;
      decisions.push_back({{"cost", result.cost}, {"subsets", result.subsets_evaluated}});
    }
  }
  if (chosen.empty()) {
    // A cascade needs at least one early exit; fall back to the cheapest
    // candidate by percentile.
    chosen = placekit::percentile_placement(profile, {0.5});
  }

  placekit::save_profile_csv(profile, (out / "profile.csv").string());
  artifacts.push_back("profile.csv");
  json plan;
  plan["schema_version"] = 1;
  plan["strategy"] = strategy;
  plan["chosen"] = chosen;
  plan["decisions"] = decisions;
  std::ofstream pf(out / "placement.json");
  pf << plan.dump(1) << "\n";
  artifacts.push_back("placement.json");
  return chosen;
}

inferkit::ExitPolicy resolve_policy(const ExperimentConfig& cfg, const PipelineState& state) {
  const auto& p = cfg.doc().at("policy");
  const auto kind = inferkit::policy_kind_from_name(p.at("kind").get<std::string>());
  switch (kind) {
    case inferkit::PolicyKind::EntropyThreshold: {
      const auto& beta = p.at("beta");
      if (beta.is_number()) return inferkit::ExitPolicy::entropy(beta.get<double>());
      if (beta.is_array()) return inferkit::ExitPolicy::entropy(beta.get<std::vector<double>>());
      if (beta == json("calibrated")) {
        if (!state.have_calibration) {
          throw ConfigError("policy asks for calibrated thresholds but none were computed");
        }
        return inferkit::ExitPolicy::entropy(state.calibrated_beta);
      }
      throw ConfigError("policy beta must be a number, an array, or \"calibrated\"");
    }
    case inferkit::PolicyKind::MaxConfidence:
      return inferkit::ExitPolicy::max_confidence(p.at("beta").get<double>());
    case inferkit::PolicyKind::LearnedGate:
      return inferkit::ExitPolicy::learned_gate(p.at("cutoff").get<double>());
    case inferkit::PolicyKind::AlwaysFinal:
      return inferkit::ExitPolicy::always_final();
    case inferkit::PolicyKind::FixedExit:
      return inferkit::ExitPolicy::fixed(p.at("fixed").get<int>());
  }
  throw ConfigError("unhandled policy kind");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  fs::path out(cfg.output_dir());
  if (out.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv)) out = fs::path(root) / out;
  }
  fs::create_directories(out);

  ExperimentResult result;
  result.output_dir = out.string();
  PipelineState state;

  auto run_stage = [&](const std::string& name, auto&& body) {
    if (!cfg.stage_enabled(name)) return;
    try {
      body();
    } catch (const std::exception& e) {
      throw ContractError("stage '" + name + "' failed: " + e.what());
    }
  };

  run_stage("dataset", [&] {
    ensure_data(cfg, state);
    save_dataset_csv(state.all, (out / "dataset.csv").string());
    result.artifacts.push_back("dataset.csv");
  });

  // Placement resolution also covers the enabled placement stage's
  // artifacts; later stages need the chosen indices either way.
  const bool wants_model = cfg.stage_enabled("train") || cfg.stage_enabled("calibrate") ||
                           cfg.stage_enabled("infer") || cfg.stage_enabled("simulate") ||
                           cfg.stage_enabled("diagnose") || cfg.stage_enabled("placement");
  if (wants_model) {
    ensure_data(cfg, state);
    state.placement = resolve_placement(cfg, state, out, result.artifacts);
    state.net = build_net(cfg, state, state.placement, cfg.seed());
    state.have_net = true;
  }

  run_stage("train", [&] {
    const auto tcfg = training_config(cfg.doc().at("training"), cfg.seed());
    const auto train_result = trainkit::train(state.net, state.split.train, tcfg);
    trainkit::save_metrics_csv(train_result, state.net, (out / "metrics.csv").string());
    result.artifacts.push_back("metrics.csv");
    exitnet::save_model(state.net, (out / "model.json").string(), "model.ckpt");
    result.artifacts.push_back("model.json");
    result.artifacts.push_back("model.ckpt");
  });

  run_stage("calibrate", [&] {
    const auto& c = cfg.doc().at("calibration");
    const auto cache = inferkit::build_cascade_cache(state.net, state.split.validation);
    state.calibrated_beta =
        inferkit::calibrate_thresholds_per_exit(cache, c.at("budget").get<double>());
    state.have_calibration = true;
    if (c.at("mode").get<std::string>() == "single") {
      const auto single = inferkit::calibrate_single_threshold(
          cache, c.at("target").get<double>(), c.at("mu").get<double>(),
          c.at("max_iters").get<long>());
      if (single.feasible) {
        state.calibrated_beta.assign(state.net.exit_count(), single.beta);
      }
      inferkit::save_calibration_json((out / "calibration.json").string(), state.calibrated_beta,
                                      &single);
    } else {
      inferkit::save_calibration_json((out / "calibration.json").string(), state.calibrated_beta);
    }
    result.artifacts.push_back("calibration.json");
  });

  run_stage("infer", [&] {
    const auto policy = resolve_policy(cfg, state);
    state.inference = inferkit::run_adaptive_inference(state.net, policy, state.split.test);
    state.have_inference = true;
    inferkit::save_ledger_csv(state.inference, state.split.test, (out / "ledger.csv").string());
    result.artifacts.push_back("ledger.csv");
  });

  run_stage("simulate", [&] {
    if (!cfg.doc().contains("topology")) throw ConfigError("simulate stage needs a topology");
    const auto& t = cfg.doc().at("topology");
    tiersim::TierTopology topo;
    if (t.contains("path")) {
      topo = tiersim::load_topology_json(t.at("path").get<std::string>());
    } else {
      // Inline topology document.
      std::ofstream tmp(out / "topology.json");
      tmp << t.dump(1) << "\n";
      tmp.close();
      topo = tiersim::load_topology_json((out / "topology.json").string());
      result.artifacts.push_back("topology.json");
    }
    std::vector<int> exits;
    if (state.have_inference) {
      exits = state.inference.ledger.exit_ordinal;
    } else {
      exits.assign(state.split.test.size(), state.net.exit_count());
    }
    const auto report = tiersim::simulate(state.net, topo, exits);
    tiersim::save_sim_report_csv(report, (out / "simreport.csv").string());
    result.artifacts.push_back("simreport.csv");
  });

  run_stage("diagnose", [&] {
    const auto& d = cfg.doc().at("diagnostics");
    const auto points = diagkit::ib_plane(state.net, state.split.test, d.at("ib_bins").get<int>());
    diagkit::save_ib_points_csv(points, (out / "ibplane.csv").string());
    result.artifacts.push_back("ibplane.csv");
    if (d.contains("convergence")) {
      const auto& c = d.at("convergence");
      const auto base_cfg = training_config(cfg.doc().at("training"), cfg.seed());
      auto factory = [&](std::uint64_t seed) { return build_net(cfg, state, state.placement, seed); };
      const auto records = diagkit::convergence_compare(
          factory, state.split.train, c.at("strategies").get<std::vector<std::string>>(),
          c.at("target_loss").get<double>(), c.at("seeds").get<std::vector<std::uint64_t>>(),
          base_cfg);
      diagkit::save_convergence_csv(records, (out / "convergence.csv").string());
      result.artifacts.push_back("convergence.csv");
    }
  });

  // Manifest last: resolved config, fingerprint, artifact list.
  json manifest;
  manifest["schema_version"] = 1;
  manifest["config"] = cfg.doc();
  manifest["config_hash"] = hash_hex(cfg.fingerprint());
  manifest["seed"] = cfg.seed();
  manifest["artifacts"] = result.artifacts;
  std::ofstream mf(out / "manifest.json");
  mf << manifest.dump(1) << "\n";
  result.artifacts.push_back("manifest.json");
  return result;
}

}  // namespace multiexit::cli
