#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmlab/grposim.hpp"
#include "rmlab/trainer.hpp"

namespace rmlab {

// Policy-simulation block of an experiment.
struct SimSettings {
  ToyPolicy policy;
  SimOptions options;
  int steps = 200;

  void validate() const;
};

// One experiment, one document. The root seed is the only seed a user sets:
// resolve_seeds() derives every nested stream from it, so partial pipelines
// (gen alone, train alone) stay reproducible.
struct ExperimentConfig {
  CorpusConfig corpus;
  PairBuildSpec pairs;
  TrainConfig train;
  SimSettings sim;
  std::vector<std::string> compare_variants{"bt", "bt_wt"};
  std::vector<std::uint64_t> compare_seeds{1, 2, 3};
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  void resolve_seeds();   // stamps corpus/pairs/train seeds from the root
  void validate() const;  // throws ConfigError
};

// Parses a JSON document over the defaults. Unknown or mistyped fields name
// their dotted path; unknown fields are fatal only in strict mode.
ExperimentConfig experiment_from_json(const std::string& text, bool strict);

// Canonical form: sorted keys, every field explicit. Two configs are
// equivalent iff their canonical forms match.
std::string experiment_to_json(const ExperimentConfig& config);

// FNV-1a 64 over the canonical form, printed as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// Model-architecture header embedded in binary checkpoints.
std::string model_config_json(const BackboneConfig& backbone, const HeadConfig& head);
void parse_model_config_json(const std::string& text, BackboneConfig* backbone,
                             HeadConfig* head);

}  // namespace rmlab
