#pragma once

#include <string>

#include "crfmot/learning.hpp"
#include "crfmot/simulator.hpp"
#include "crfmot/tracklets.hpp"

namespace crfmot {

// Flat key=value configuration covering every tunable in the pipeline.
// Unknown keys are rejected; every key has a default.
struct RunConfig {
  CrfParams params;
  LinkThresholds link;
  DifficultPairConfig difficult;
  SceneConfig scene;
  TrainSchedule schedule;
  std::string unary_provider;    // file path; empty = default logistic
  std::string pairwise_provider; // file path; empty = default logistic
  std::string mode = "crf";      // crf | unary
  int d_a = 16;
  int jobs = 0;  // <= 0: available parallelism
  double iou_threshold = 0.5;
  int train_scenes = 6;
  int val_scenes = 2;
  double min_visibility = 0.5;
};

// Throws MalformedInput on unknown keys or unparsable values.
void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value);

// key=value lines; '#' comments and blank lines ignored.
RunConfig parse_run_config(const std::string& path);

// Every key with its resolved value, one per line, stable order.
std::string serialize_run_config(const RunConfig& cfg);

// Loads file-backed providers when paths are set, default logistics otherwise.
ProviderSet make_providers(const RunConfig& cfg);

AssociationMode parse_mode(const std::string& mode);

}  // namespace crfmot
