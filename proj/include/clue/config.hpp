#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "clue/forgegen.hpp"
#include "clue/losses.hpp"
#include "clue/model.hpp"
#include "clue/optim.hpp"

namespace clue {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  // Share of the train split held out for checkpoint selection.
  double val_fraction = 0.1;
  // Random flips and transposes of training pairs.
  bool augment = true;

  void validate() const;
};

struct ExperimentConfig {
  DatasetSpec data;
  ModelConfig model;
  LossWeights loss;
  AdamConfig optimizer;
  TrainConfig train;
  std::uint64_t seed = 7;
  double threshold = 0.5;
  std::string output_dir = "runs/default";

  void validate() const;

  nlohmann::json to_json() const;
  // Keys missing from `j` keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);

  // FNV-1a of the canonical JSON without output_dir and train.epochs, so a
  // run may be resumed with a longer schedule.
  std::uint64_t hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

// Applies `dotted.key=value` to a config. The value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Resolves a relative output path against $CLUE_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output(const std::string& path);

std::string hex64(std::uint64_t v);

}  // namespace clue
