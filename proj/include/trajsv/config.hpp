#pragma once

// Run configuration: one JSON document with a section per stage. Missing
// keys keep their defaults, unknown keys are rejected. The effective config
// is echoed into every output manifest and parses back to the same run.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "trajsv/evaluate.hpp"
#include "trajsv/objective.hpp"
#include "trajsv/trainer.hpp"

namespace trajsv::config {

using Json = nlohmann::ordered_json;

struct VisualConfig {
  std::string provider = "stub";  // "stub" or "file"
  std::uint64_t seed = 3;
  std::string path;  // features JSONL for the file provider

  void validate() const;
};

struct RunConfig {
  model::TokenizerConfig tokenizer;  // carries the field
  synth::GenConfig generate;
  model::ModelConfig model;
  objective::LossConfig loss;
  train::TrainConfig train;
  retrieval::AnnParams index;
  VisualConfig visual;
  eval::EvalOptions eval;

  /// Copies shared values (field, segment length, clip width, index params) into the
  /// sections that mirror them.
  void sync();
  void validate() const;
};

Json to_json(const RunConfig& cfg);
/// Overlays `j` on `base`.
RunConfig from_json(const Json& j, RunConfig base = {});
RunConfig load(const std::filesystem::path& path, RunConfig base = {});

Json model_to_json(const model::ModelConfig& cfg);
model::ModelConfig model_from_json(const Json& j);

/// Small dimensions that train the full synthetic corpus on one CPU core
/// within minutes.
RunConfig desk_preset();

/// "paper" (library defaults), "desk" or "tiny"; throws ConfigError otherwise.
RunConfig preset(const std::string& name);

/// Two-layer, width-8 model for gradient checks and smoke runs.
model::ModelConfig tiny_model(std::size_t n_clips = 2, int m = 3);

}  // namespace trajsv::config
