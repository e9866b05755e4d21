#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "redeval/registry.hpp"
#include "redeval/types.hpp"

namespace redeval {

struct ValidationIssue {
  std::string where;    // document location or component name
  std::string message;
};

// One component of the experiment, fully merged with inline overrides.
struct ResolvedComponent {
  std::string name;
  nlohmann::json document;  // merged document
  std::filesystem::path origin_dir;
  std::string version;  // content hash of the merged document
};

struct ValidatedExperiment {
  ExperimentSpec spec;
  ResolvedComponent model;
  ResolvedComponent attack;
  std::vector<ResolvedComponent> defenses;
  ResolvedComponent dataset;
  std::vector<ResolvedComponent> judgers;
  // Aux model name -> resolved model component (attacker/judge/defense aux).
  std::map<std::string, ResolvedComponent> aux_models;

  ModelConfig model_config;
  AttackConfig attack_config;
  std::vector<DefenseConfig> defense_configs;
  DatasetConfig dataset_config;
  std::vector<JudgerConfig> judger_configs;
};

struct ValidationResult {
  std::optional<ValidatedExperiment> experiment;
  std::vector<ValidationIssue> errors;

  bool ok() const { return errors.empty() && experiment.has_value(); }
};

// Resolves every ref, enforces capability gates and aux-model presence, and
// returns either a fully resolved experiment or the complete error list.
// Pure apart from reading referenced data files; no network, no writes.
ValidationResult validate_experiment(const nlohmann::json& document,
                                     const Registry& registry);

// Serializes the resolved experiment (tuple, run parameters and merged
// component documents) so a run can be replayed without the registry.
nlohmann::json resolved_experiment_document(const ValidatedExperiment& experiment);

// Rebuilds a validated experiment from a resolved document (replay path).
ValidatedExperiment experiment_from_resolved_document(const nlohmann::json& resolved);

}  // namespace redeval
