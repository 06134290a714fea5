#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "multiexit/common/errors.hpp"

namespace multiexit::cli {

// Experiment document: schema-validated (unknown keys rejected), then
// resolved so that every defaulted parameter is explicit. The resolved
// form is what gets fingerprinted and echoed into the run manifest.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(const nlohmann::json& raw);
  static ExperimentConfig load(const std::string& path);

  const nlohmann::json& doc() const { return doc_; }
  std::uint64_t seed() const;
  void override_seed(std::uint64_t seed);
  std::string output_dir() const;
  bool stage_enabled(const std::string& name) const;
  std::uint64_t fingerprint() const;

 private:
  nlohmann::json doc_;
};

struct ExperimentResult {
  std::string output_dir;
  std::vector<std::string> artifacts;  // file names relative to output_dir
};

// Runs the enabled pipeline stages in order (dataset, placement, train,
// calibrate, infer, simulate, diagnose), writing one artifact set per
// stage plus a manifest. A stage failure aborts with the stage name;
// artifacts already written stay on disk.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Output root override for relative output_dir values.
constexpr const char* kOutputRootEnv = "MULTIEXIT_OUTPUT_ROOT";

}  // namespace multiexit::cli
