#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "redeval/errors.hpp"

namespace redeval {

// Decoding defaults follow the reproducibility regime: temperature 0 with
// fixed seeds unless a config says otherwise.
struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::uint64_t> seed;
  bool logprobs_requested = false;
};

// Binary adjudication result. 1 denotes harmful / attack success, 0 safe.
struct Verdict {
  int binary = 0;
  std::optional<int> graded;
  int scale_min = 0;
  int scale_max = 0;
  std::string judger_id;
  std::string raw_judger_output;
};

enum class ComponentKind { Model, Attack, Defense, Dataset, Judger };

constexpr const char* to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::Model: return "model";
    case ComponentKind::Attack: return "attack";
    case ComponentKind::Defense: return "defense";
    case ComponentKind::Dataset: return "dataset";
    case ComponentKind::Judger: return "judger";
  }
  return "unknown";
}

ComponentKind component_kind_from_string(std::string_view name);

// Reference into the component registry, optionally carrying inline
// overrides that shallow-merge over the registered document.
struct ComponentRef {
  ComponentKind kind = ComponentKind::Model;
  std::string name;
  nlohmann::json overrides = nlohmann::json::object();
};

struct SamplingPolicy {
  enum class Mode { All, PrefixN, SeededRandom };
  Mode mode = Mode::All;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

constexpr const char* to_string(SamplingPolicy::Mode mode) {
  switch (mode) {
    case SamplingPolicy::Mode::All: return "all";
    case SamplingPolicy::Mode::PrefixN: return "prefix_n";
    case SamplingPolicy::Mode::SeededRandom: return "seeded_random";
  }
  return "unknown";
}

enum class DefenseComposition { Cascade, Parallel };

// The five-element experiment tuple plus run parameters; the unit of
// execution and replay.
struct ExperimentSpec {
  std::string experiment_id;
  ComponentRef model_ref;
  ComponentRef attack_ref;
  std::vector<ComponentRef> defense_refs;  // empty = no defense baseline
  DefenseComposition defense_composition = DefenseComposition::Cascade;
  ComponentRef dataset_ref;
  SamplingPolicy sampling;
  std::vector<ComponentRef> judger_refs;  // non-empty
  std::vector<std::string> gpt_judger_names;  // designated GPT-template subset
  std::uint64_t root_seed = 0;
  DecodingParams decoding;
  std::optional<std::uint64_t> budget_limit;
  std::string refusal_text;  // canonical defense refusal; empty = default
};

}  // namespace redeval
