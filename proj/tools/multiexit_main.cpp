#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "multiexit/cli/datasets.hpp"
#include "multiexit/cli/experiment.hpp"
#include "multiexit/common/csv.hpp"
#include "multiexit/diagkit/ib_plane.hpp"
#include "multiexit/exitnet/model_io.hpp"
#include "multiexit/inferkit/adaptive.hpp"
#include "multiexit/inferkit/calibrate.hpp"
#include "multiexit/placekit/placement.hpp"
#include "multiexit/tiersim/simulate.hpp"

namespace mx = multiexit;

namespace {

mx::inferkit::ExitPolicy policy_from_flags(const std::string& kind,
                                           const std::vector<double>& beta, double cutoff,
                                           int fixed) {
  const auto k = mx::inferkit::policy_kind_from_name(kind);
  switch (k) {
    case mx::inferkit::PolicyKind::EntropyThreshold:
      if (beta.empty()) throw mx::ConfigError("entropy policy needs --beta");
      return mx::inferkit::ExitPolicy::entropy(beta);
    case mx::inferkit::PolicyKind::MaxConfidence:
      if (beta.empty()) throw mx::ConfigError("max-confidence policy needs --beta");
      return mx::inferkit::ExitPolicy::max_confidence(beta[0]);
    case mx::inferkit::PolicyKind::LearnedGate:
      return mx::inferkit::ExitPolicy::learned_gate(cutoff);
    case mx::inferkit::PolicyKind::AlwaysFinal:
      return mx::inferkit::ExitPolicy::always_final();
    case mx::inferkit::PolicyKind::FixedExit:
      return mx::inferkit::ExitPolicy::fixed(fixed);
  }
  throw mx::ConfigError("unhandled policy kind");
}

mx::cli::ExperimentConfig load_config(const std::string& path, bool seed_set,
                                      std::uint64_t seed) {
  auto cfg = mx::cli::ExperimentConfig::load(path);
  if (seed_set) cfg.override_seed(seed);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-exit network toolkit: placement, training, adaptive inference,\n"
               "tier simulation, and diagnostics."};
  app.require_subcommand(1);

  // --- gen ---
  auto* gen = app.add_subcommand("gen", "Generate a synthetic mixture dataset");
  long gen_n = 1000;
  double gen_easy = 0.8;
  int gen_classes = 2;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "dataset.csv";
  gen->add_option("--n", gen_n, "Sample count");
  gen->add_option("--easy-fraction", gen_easy, "Share of linearly separable samples");
  gen->add_option("--classes", gen_classes, "Class count");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output CSV");

  // --- place ---
  auto* place = app.add_subcommand("place", "Choose exit placements from a cost profile");
  std::string place_strategy = "greedy";
  std::string place_profile;
  std::string place_out = "placement.json";
  double place_th = 0.7;
  int place_max = -1;
  std::vector<double> place_percentiles;
  place->add_option("--strategy", place_strategy, "greedy, exhaustive, or percentile");
  place->add_option("--profile", place_profile, "Profile CSV (index,gamma_f,gamma_c,I)")
      ->required();
  place->add_option("--th", place_th, "Greedy TH hyper-parameter in [0,1]");
  place->add_option("--max-exits", place_max, "Exhaustive subset size cap (-1 = unbounded)");
  place->add_option("--percentiles", place_percentiles, "Cost percentiles in (0,1)");
  place->add_option("--out", place_out, "Output plan JSON");

  // --- train / run ---
  auto* train = app.add_subcommand("train", "Run the pipeline through the training stage");
  auto* run = app.add_subcommand("run", "Run every configured pipeline stage");
  std::string cfg_path;
  std::uint64_t cfg_seed = 0;
  bool cfg_seed_set = false;
  for (auto* sub : {train, run}) {
    sub->add_option("--config", cfg_path, "Experiment config JSON")->required();
    sub->add_option("--seed", cfg_seed, "Seed override")->each([&](const std::string&) {
      cfg_seed_set = true;
    });
  }

  // --- calibrate ---
  auto* calibrate = app.add_subcommand("calibrate", "Tune entropy thresholds on a dataset");
  std::string cal_model, cal_data, cal_out = "calibration.json", cal_mode = "per_exit";
  double cal_budget = 0.01, cal_target = 0.9, cal_mu = 1.0;
  long cal_iters = 200;
  calibrate->add_option("--model", cal_model, "Model JSON")->required();
  calibrate->add_option("--data", cal_data, "Validation CSV")->required();
  calibrate->add_option("--mode", cal_mode, "per_exit or single");
  calibrate->add_option("--budget", cal_budget, "Per-exit accuracy-drop budget");
  calibrate->add_option("--target", cal_target, "Single-threshold target accuracy");
  calibrate->add_option("--mu", cal_mu, "Single-threshold step size");
  calibrate->add_option("--max-iters", cal_iters, "Single-threshold iteration cap");
  calibrate->add_option("--out", cal_out, "Output report JSON");

  // --- infer ---
  auto* infer = app.add_subcommand("infer", "Adaptive inference with a stopping policy");
  std::string inf_model, inf_data, inf_report = "costs.csv", inf_policy = "entropy";
  std::vector<double> inf_beta;
  double inf_cutoff = 0.5;
  int inf_fixed = 0;
  infer->add_option("--model", inf_model, "Model JSON")->required();
  infer->add_option("--data", inf_data, "Dataset CSV")->required();
  infer->add_option("--policy", inf_policy,
                    "entropy, max_confidence, learned_gate, always_final, fixed_exit");
  infer->add_option("--beta", inf_beta, "Threshold(s); one value broadcasts");
  infer->add_option("--cutoff", inf_cutoff, "Learned-gate binarization cutoff");
  infer->add_option("--fixed", inf_fixed, "Fixed exit ordinal");
  infer->add_option("--report", inf_report, "Output ledger CSV");

  // --- simulate ---
  auto* simulate = app.add_subcommand("simulate", "Replay an exit ledger over a tier topology");
  std::string sim_model, sim_topology, sim_ledger, sim_out = "simreport.csv";
  simulate->add_option("--model", sim_model, "Model JSON")->required();
  simulate->add_option("--topology", sim_topology, "Topology JSON")->required();
  simulate->add_option("--ledger", sim_ledger, "Ledger CSV from infer")->required();
  simulate->add_option("--out", sim_out, "Output report CSV");

  // --- diag ---
  auto* diag = app.add_subcommand("diag", "Diagnostics");
  diag->require_subcommand(1);
  auto* ibplane = diag->add_subcommand("ibplane", "Information-plane coordinates per exit");
  std::string ib_model, ib_data, ib_out = "ibplane.csv";
  int ib_bins = 16;
  ibplane->add_option("--model", ib_model, "Model JSON")->required();
  ibplane->add_option("--data", ib_data, "Dataset CSV")->required();
  ibplane->add_option("--bins", ib_bins, "Histogram bins per dimension");
  ibplane->add_option("--out", ib_out, "Output CSV");
  auto* convergence = diag->add_subcommand("convergence", "Paired convergence comparison");
  convergence->add_option("--config", cfg_path, "Experiment config JSON")->required();
  convergence->add_option("--seed", cfg_seed, "Seed override")->each([&](const std::string&) {
    cfg_seed_set = true;
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto data = mx::cli::generate_mixture_dataset(gen_n, gen_easy, gen_classes, gen_seed);
      mx::cli::save_dataset_csv(data, gen_out);
      std::cout << "wrote " << gen_out << " (" << data.size() << " samples, "
                << data.class_count << " classes)\n";
    } else if (*place) {
      const auto profile = mx::placekit::load_profile_csv(place_profile);
      nlohmann::json plan;
      plan["schema_version"] = 1;
      plan["strategy"] = place_strategy;
      if (place_strategy == "greedy") {
        const auto p = mx::placekit::greedy_placement(profile, place_th);
        plan["th"] = place_th;
        plan["chosen"] = p.chosen;
        auto& ds = plan["decisions"] = nlohmann::json::array();
        for (const auto& d : p.decisions) {
          ds.push_back({{"index", d.index}, {"kept", d.kept}, {"lhs", d.lhs}});
        }
      } else if (place_strategy == "exhaustive") {
        const auto r = mx::placekit::exhaustive_placement(profile, place_max);
        plan["chosen"] = r.chosen;
        plan["cost"] = r.cost;
      } else if (place_strategy == "percentile") {
        if (place_percentiles.empty()) place_percentiles = {1.0 / 3.0, 2.0 / 3.0};
        plan["chosen"] = mx::placekit::percentile_placement(profile, place_percentiles);
      } else {
        throw mx::ConfigError("unknown placement strategy: " + place_strategy);
      }
      std::ofstream out(place_out);
      out << plan.dump(1) << "\n";
      std::cout << "wrote " << place_out << "\n";
    } else if (*train || *run) {
      auto cfg = load_config(cfg_path, cfg_seed_set, cfg_seed);
      if (*train) {
        // Trim the stage list to the training prefix.
        nlohmann::json doc = cfg.doc();
        std::vector<std::string> stages;
        for (const auto& s : {"dataset", "placement", "train"}) {
          if (cfg.stage_enabled(s)) stages.push_back(s);
        }
        doc["stages"] = stages;
        cfg = mx::cli::ExperimentConfig::parse(doc);
      }
      const auto result = mx::cli::run_experiment(cfg);
      std::cout << "artifacts in " << result.output_dir << ":\n";
      for (const auto& a : result.artifacts) std::cout << "  " << a << "\n";
    } else if (*calibrate) {
      const auto net = mx::exitnet::load_model(cal_model);
      const auto data = mx::cli::load_tabular_csv(cal_data);
      const auto cache = mx::inferkit::build_cascade_cache(net, data);
      const auto betas = mx::inferkit::calibrate_thresholds_per_exit(cache, cal_budget);
      if (cal_mode == "single") {
        const auto single =
            mx::inferkit::calibrate_single_threshold(cache, cal_target, cal_mu, cal_iters);
        mx::inferkit::save_calibration_json(cal_out, betas, &single);
        if (!single.feasible) {
          std::cout << "target accuracy infeasible (final-exit accuracy "
                    << single.achieved_accuracy << ")\n";
        }
      } else {
        mx::inferkit::save_calibration_json(cal_out, betas);
      }
      std::cout << "wrote " << cal_out << "\n";
    } else if (*infer) {
      const auto net = mx::exitnet::load_model(inf_model);
      const auto data = mx::cli::load_tabular_csv(inf_data);
      const auto policy = policy_from_flags(inf_policy, inf_beta, inf_cutoff, inf_fixed);
      const auto result = mx::inferkit::run_adaptive_inference(net, policy, data);
      mx::inferkit::save_ledger_csv(result, data, inf_report);
      std::printf("accuracy %.4f, average cost %.1f\n", result.accuracy(data.labels),
                  result.ledger.average_cost());
      std::cout << "wrote " << inf_report << "\n";
    } else if (*simulate) {
      const auto net = mx::exitnet::load_model(sim_model);
      const auto topo = mx::tiersim::load_topology_json(sim_topology);
      const auto exits = mx::inferkit::load_ledger_exits(sim_ledger);
      const auto report = mx::tiersim::simulate(net, topo, exits);
      mx::tiersim::save_sim_report_csv(report, sim_out);
      std::printf("mean latency %.3f ms (p50 %.3f, p95 %.3f, p99 %.3f)\n", report.mean_latency_ms,
                  report.p50_ms, report.p95_ms, report.p99_ms);
      std::cout << "wrote " << sim_out << "\n";
    } else if (*ibplane) {
      const auto net = mx::exitnet::load_model(ib_model);
      const auto data = mx::cli::load_tabular_csv(ib_data);
      const auto points = mx::diagkit::ib_plane(net, data, ib_bins);
      mx::diagkit::save_ib_points_csv(points, ib_out);
      std::cout << "wrote " << ib_out << "\n";
    } else if (*convergence) {
      auto cfg = load_config(cfg_path, cfg_seed_set, cfg_seed);
      nlohmann::json doc = cfg.doc();
      doc["stages"] = std::vector<std::string>{"diagnose"};
      cfg = mx::cli::ExperimentConfig::parse(doc);
      const auto result = mx::cli::run_experiment(cfg);
      std::cout << "artifacts in " << result.output_dir << ":\n";
      for (const auto& a : result.artifacts) std::cout << "  " << a << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
