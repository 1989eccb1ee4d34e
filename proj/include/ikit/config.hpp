#pragma once

#include <string>

#include "ikit/blocks.hpp"
#include "ikit/tasks.hpp"

namespace ikit {

/// Fully-resolved experiment description. Defaults depend on the task
/// kind; unknown JSON keys are rejected so hyperparameter typos cannot
/// silently fall back to defaults.
struct ExperimentConfig {
  TaskSpec task;
  ModuleSpec model;
  BlockSpec block;
  OptimSpec optim;
  TrainOptions train;
  bool use_block = false;  // anomaly trains a stacked block, not a module
};

ExperimentConfig default_config(TaskKind kind = TaskKind::Sine);

/// Strict parse: every key must be known, every value well-typed. The
/// task kind is read first so kind-specific defaults fill the rest.
ExperimentConfig load_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Full echo including every default; load_config(config_to_json(c))
/// resolves to the identical configuration.
std::string config_to_json(const ExperimentConfig& c);

}  // namespace ikit
