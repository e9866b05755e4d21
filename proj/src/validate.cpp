#include "redeval/validate.hpp"

#include <set>

#include "redeval/hash.hpp"

namespace redeval {

namespace {

using nlohmann::json;

struct RefSyntax {
  std::string name;
  json overrides = json::object();
};

RefSyntax parse_ref_node(const json& node) {
  RefSyntax ref;
  if (node.is_string()) {
    ref.name = node.get<std::string>();
  } else if (node.is_object()) {
    if (!node.contains("name") || !node.at("name").is_string()) {
      throw FrameworkError(ErrorKind::Validation, "component ref needs a name");
    }
    ref.name = node.at("name").get<std::string>();
    if (node.contains("overrides")) {
      if (!node.at("overrides").is_object()) {
        throw FrameworkError(ErrorKind::Validation, "overrides must be an object");
      }
      ref.overrides = node.at("overrides");
    }
  } else {
    throw FrameworkError(ErrorKind::Validation,
                         "component ref must be a name or {name, overrides}");
  }
  if (ref.name.empty()) {
    throw FrameworkError(ErrorKind::Validation, "component name must be non-empty");
  }
  return ref;
}

class Collector {
 public:
  explicit Collector(const Registry& registry) : registry_(registry) {}

  std::vector<ValidationIssue>& errors() { return errors_; }

  void error(const std::string& where, const std::string& message) {
    errors_.push_back({where, message});
  }

  std::optional<ResolvedComponent> resolve(ComponentKind kind, const json& node,
                                           const std::string& where) {
    RefSyntax ref;
    try {
      ref = parse_ref_node(node);
    } catch (const FrameworkError& err) {
      error(where, err.what());
      return std::nullopt;
    }
    const RegistryEntry* entry = registry_.find(kind, ref.name);
    if (!entry) {
      error(where, "unresolved " + std::string(to_string(kind)) + " ref '" +
                       ref.name + "'");
      return std::nullopt;
    }
    ResolvedComponent component;
    component.name = ref.name;
    component.document = shallow_merge(entry->document, ref.overrides);
    component.origin_dir = entry->origin_dir;
    component.version = version_hex(component.document);
    return component;
  }

  // Resolves a model named directly (aux models referenced by registry name).
  std::optional<ResolvedComponent> resolve_model_by_name(const std::string& name,
                                                         const std::string& where) {
    return resolve(ComponentKind::Model, json(name), where);
  }

 private:
  const Registry& registry_;
  std::vector<ValidationIssue> errors_;
};

ComponentRef make_ref(ComponentKind kind, const std::string& name) {
  ComponentRef ref;
  ref.kind = kind;
  ref.name = name;
  return ref;
}

json component_to_json(const ResolvedComponent& component) {
  return json{{"name", component.name},
              {"origin_dir", component.origin_dir.string()},
              {"document", component.document},
              {"version", component.version}};
}

ResolvedComponent component_from_json(const json& node) {
  ResolvedComponent component;
  component.name = node.at("name").get<std::string>();
  component.origin_dir = node.value("origin_dir", "");
  component.document = node.at("document");
  component.version = node.value("version", version_hex(component.document));
  return component;
}

}  // namespace

ValidationResult validate_experiment(const nlohmann::json& document,
                                     const Registry& registry) {
  Collector collector(registry);
  ValidatedExperiment experiment;
  ExperimentSpec& spec = experiment.spec;

  if (!document.is_object()) {
    collector.error("$", "experiment document must be a JSON object");
    return {std::nullopt, collector.errors()};
  }

  if (document.value("schema_version", 0) != 1) {
    collector.error("schema_version", "expected schema_version 1");
  }

  spec.experiment_id = document.value("experiment_id", "");
  if (spec.experiment_id.empty()) {
    collector.error("experiment_id", "experiment_id must be non-empty");
  }

  spec.root_seed = document.value("root_seed", 0ULL);

  if (document.contains("decoding")) {
    const json& decoding = document.at("decoding");
    spec.decoding.temperature = decoding.value("temperature", 0.0);
    spec.decoding.max_tokens = decoding.value("max_tokens", spec.decoding.max_tokens);
    if (decoding.contains("seed")) {
      spec.decoding.seed = decoding.at("seed").get<std::uint64_t>();
    }
    spec.decoding.logprobs_requested = decoding.value("logprobs", false);
    if (spec.decoding.temperature < 0.0) {
      collector.error("decoding.temperature", "temperature must be >= 0");
    }
    if (spec.decoding.max_tokens < 1) {
      collector.error("decoding.max_tokens", "max_tokens must be positive");
    }
  }

  if (document.contains("budget_limit")) {
    const json& limit = document.at("budget_limit");
    if (!limit.is_number_integer() ||
        (limit.is_number_integer() && !limit.is_number_unsigned() &&
         limit.get<std::int64_t>() < 0)) {
      collector.error("budget_limit", "budget_limit must be a non-negative integer");
    } else {
      spec.budget_limit = limit.get<std::uint64_t>();
    }
  }

  if (document.contains("sampling")) {
    const json& sampling = document.at("sampling");
    const std::string mode = sampling.value("mode", "all");
    if (mode == "all") {
      spec.sampling.mode = SamplingPolicy::Mode::All;
    } else if (mode == "prefix_n") {
      spec.sampling.mode = SamplingPolicy::Mode::PrefixN;
    } else if (mode == "seeded_random") {
      spec.sampling.mode = SamplingPolicy::Mode::SeededRandom;
    } else {
      collector.error("sampling.mode", "unknown sampling mode '" + mode + "'");
    }
    if (spec.sampling.mode != SamplingPolicy::Mode::All) {
      const bool positive_int =
          sampling.contains("n") && sampling.at("n").is_number_integer() &&
          sampling.at("n").get<std::int64_t>() >= 1;
      if (!positive_int) {
        collector.error("sampling.n", "n must be a positive integer");
      } else {
        spec.sampling.n = sampling.at("n").get<std::size_t>();
      }
    }
    spec.sampling.seed = sampling.value("seed", 0ULL);
  }

  spec.refusal_text = document.value("refusal_text", "");

  const std::string composition = document.value("defense_composition", "cascade");
  if (composition == "cascade") {
    spec.defense_composition = DefenseComposition::Cascade;
  } else if (composition == "parallel") {
    spec.defense_composition = DefenseComposition::Parallel;
  } else {
    collector.error("defense_composition", "must be cascade or parallel");
  }

  // Model.
  if (!document.contains("model")) {
    collector.error("model", "model ref required");
  } else if (auto model = collector.resolve(ComponentKind::Model,
                                            document.at("model"), "model")) {
    experiment.model = *model;
    spec.model_ref = make_ref(ComponentKind::Model, model->name);
    try {
      experiment.model_config = parse_model_config(model->name, model->document);
    } catch (const FrameworkError& err) {
      collector.error("model", err.what());
    }
  }

  // Attack.
  if (!document.contains("attack")) {
    collector.error("attack", "attack ref required");
  } else if (auto attack = collector.resolve(ComponentKind::Attack,
                                             document.at("attack"), "attack")) {
    experiment.attack = *attack;
    spec.attack_ref = make_ref(ComponentKind::Attack, attack->name);
    try {
      experiment.attack_config = parse_attack_config(attack->name, attack->document);
    } catch (const FrameworkError& err) {
      collector.error("attack", err.what());
    }
  }

  // Defenses (empty list = no-defense baseline).
  if (document.contains("defenses")) {
    const json& defenses = document.at("defenses");
    if (!defenses.is_array()) {
      collector.error("defenses", "defenses must be a list");
    } else {
      for (std::size_t i = 0; i < defenses.size(); ++i) {
        const std::string where = "defenses[" + std::to_string(i) + "]";
        if (auto defense =
                collector.resolve(ComponentKind::Defense, defenses.at(i), where)) {
          experiment.defenses.push_back(*defense);
          spec.defense_refs.push_back(make_ref(ComponentKind::Defense, defense->name));
          try {
            experiment.defense_configs.push_back(parse_defense_config(
                defense->name, defense->document, defense->origin_dir));
          } catch (const FrameworkError& err) {
            collector.error(where, err.what());
          }
        }
      }
    }
  }

  // Dataset.
  if (!document.contains("dataset")) {
    collector.error("dataset", "dataset ref required");
  } else if (auto dataset = collector.resolve(ComponentKind::Dataset,
                                              document.at("dataset"), "dataset")) {
    experiment.dataset = *dataset;
    spec.dataset_ref = make_ref(ComponentKind::Dataset, dataset->name);
    try {
      experiment.dataset_config =
          parse_dataset_config(dataset->name, dataset->document, dataset->origin_dir);
    } catch (const FrameworkError& err) {
      collector.error("dataset", err.what());
    }
  }

  // Judgers.
  if (!document.contains("judgers") || !document.at("judgers").is_array() ||
      document.at("judgers").empty()) {
    collector.error("judgers", "at least one judger ref required");
  } else {
    const json& judgers = document.at("judgers");
    for (std::size_t i = 0; i < judgers.size(); ++i) {
      const std::string where = "judgers[" + std::to_string(i) + "]";
      if (auto judger = collector.resolve(ComponentKind::Judger, judgers.at(i), where)) {
        experiment.judgers.push_back(*judger);
        spec.judger_refs.push_back(make_ref(ComponentKind::Judger, judger->name));
        try {
          experiment.judger_configs.push_back(
              parse_judger_config(judger->name, judger->document, judger->origin_dir));
        } catch (const FrameworkError& err) {
          collector.error(where, err.what());
        }
      }
    }
  }

  // Designated GPT-template judger subset for aggregation.
  if (document.contains("gpt_judgers")) {
    for (const auto& name : document.at("gpt_judgers")) {
      const std::string judger_name = name.get<std::string>();
      bool known = false;
      for (const auto& ref : spec.judger_refs) known |= ref.name == judger_name;
      if (!known) {
        collector.error("gpt_judgers",
                        "'" + judger_name + "' is not one of the experiment judgers");
      }
      spec.gpt_judger_names.push_back(judger_name);
    }
  }

  // Aux models demanded by components.
  auto resolve_aux = [&](const std::map<std::string, std::string>& refs,
                         const std::string& where) {
    for (const auto& [role, model_name] : refs) {
      if (experiment.aux_models.count(model_name)) continue;
      if (auto aux = collector.resolve_model_by_name(model_name,
                                                     where + ".aux_models." + role)) {
        try {
          parse_model_config(aux->name, aux->document);
          experiment.aux_models.emplace(model_name, *aux);
        } catch (const FrameworkError& err) {
          collector.error(where + ".aux_models." + role, err.what());
        }
      }
    }
  };
  resolve_aux(experiment.attack_config.aux_model_refs, "attack");
  for (std::size_t i = 0; i < experiment.defense_configs.size(); ++i) {
    resolve_aux(experiment.defense_configs[i].aux_model_refs,
                "defenses[" + std::to_string(i) + "]");
  }
  for (const auto& judger : experiment.judger_configs) {
    if (!judger.judge_model_ref.empty()) {
      resolve_aux({{"judge_model", judger.judge_model_ref}}, judger.name);
    }
  }

  // Capability gates: required capabilities of the attack and of every
  // defense must be a subset of the target model's advertised set.
  if (collector.errors().empty()) {
    if (!check_capability(experiment.model_config,
                          experiment.attack_config.required_capabilities)) {
      collector.error("attack",
                      "capability gate: attack '" + experiment.attack_config.name +
                          "' requires capabilities the model '" +
                          experiment.model_config.name + "' does not advertise");
    }
    for (const auto& defense : experiment.defense_configs) {
      if (!check_capability(experiment.model_config, defense.required_capabilities)) {
        collector.error("defenses",
                        "capability gate: defense '" + defense.name +
                            "' requires capabilities the model '" +
                            experiment.model_config.name + "' does not advertise");
      }
    }
  }

  if (!collector.errors().empty()) {
    return {std::nullopt, collector.errors()};
  }
  return {std::move(experiment), {}};
}

nlohmann::json resolved_experiment_document(const ValidatedExperiment& experiment) {
  const ExperimentSpec& spec = experiment.spec;
  json decoding{{"temperature", spec.decoding.temperature},
                {"max_tokens", spec.decoding.max_tokens},
                {"logprobs", spec.decoding.logprobs_requested}};
  if (spec.decoding.seed) decoding["seed"] = *spec.decoding.seed;

  json sampling{{"mode", to_string(spec.sampling.mode)},
                {"seed", spec.sampling.seed}};
  if (spec.sampling.mode != SamplingPolicy::Mode::All) sampling["n"] = spec.sampling.n;

  json doc{{"schema_version", 1},
           {"experiment_id", spec.experiment_id},
           {"root_seed", spec.root_seed},
           {"decoding", std::move(decoding)},
           {"sampling", std::move(sampling)},
           {"defense_composition",
            spec.defense_composition == DefenseComposition::Cascade ? "cascade"
                                                                    : "parallel"}};
  if (spec.budget_limit) doc["budget_limit"] = *spec.budget_limit;
  if (!spec.gpt_judger_names.empty()) doc["gpt_judgers"] = spec.gpt_judger_names;
  if (!spec.refusal_text.empty()) doc["refusal_text"] = spec.refusal_text;

  json components;
  components["model"] = component_to_json(experiment.model);
  components["attack"] = component_to_json(experiment.attack);
  json defenses = json::array();
  for (const auto& defense : experiment.defenses) {
    defenses.push_back(component_to_json(defense));
  }
  components["defenses"] = std::move(defenses);
  components["dataset"] = component_to_json(experiment.dataset);
  json judgers = json::array();
  for (const auto& judger : experiment.judgers) {
    judgers.push_back(component_to_json(judger));
  }
  components["judgers"] = std::move(judgers);
  json aux = json::object();
  for (const auto& [name, component] : experiment.aux_models) {
    aux[name] = component_to_json(component);
  }
  components["aux_models"] = std::move(aux);
  doc["components"] = std::move(components);
  return doc;
}

ValidatedExperiment experiment_from_resolved_document(const nlohmann::json& resolved) {
  ValidatedExperiment experiment;
  ExperimentSpec& spec = experiment.spec;

  spec.experiment_id = resolved.at("experiment_id").get<std::string>();
  spec.root_seed = resolved.value("root_seed", 0ULL);
  const json& decoding = resolved.at("decoding");
  spec.decoding.temperature = decoding.value("temperature", 0.0);
  spec.decoding.max_tokens = decoding.value("max_tokens", 1024);
  if (decoding.contains("seed")) {
    spec.decoding.seed = decoding.at("seed").get<std::uint64_t>();
  }
  spec.decoding.logprobs_requested = decoding.value("logprobs", false);
  const json& sampling = resolved.at("sampling");
  const std::string mode = sampling.value("mode", "all");
  spec.sampling.mode = mode == "prefix_n"
                           ? SamplingPolicy::Mode::PrefixN
                           : (mode == "seeded_random" ? SamplingPolicy::Mode::SeededRandom
                                                      : SamplingPolicy::Mode::All);
  spec.sampling.n = sampling.value("n", 0ULL);
  spec.sampling.seed = sampling.value("seed", 0ULL);
  spec.defense_composition =
      resolved.value("defense_composition", "cascade") == std::string("parallel")
          ? DefenseComposition::Parallel
          : DefenseComposition::Cascade;
  if (resolved.contains("budget_limit")) {
    spec.budget_limit = resolved.at("budget_limit").get<std::uint64_t>();
  }
  spec.refusal_text = resolved.value("refusal_text", "");
  if (resolved.contains("gpt_judgers")) {
    for (const auto& name : resolved.at("gpt_judgers")) {
      spec.gpt_judger_names.push_back(name.get<std::string>());
    }
  }

  const json& components = resolved.at("components");
  experiment.model = component_from_json(components.at("model"));
  experiment.attack = component_from_json(components.at("attack"));
  for (const auto& node : components.at("defenses")) {
    experiment.defenses.push_back(component_from_json(node));
  }
  experiment.dataset = component_from_json(components.at("dataset"));
  for (const auto& node : components.at("judgers")) {
    experiment.judgers.push_back(component_from_json(node));
  }
  for (const auto& [name, node] : components.at("aux_models").items()) {
    experiment.aux_models.emplace(name, component_from_json(node));
  }

  spec.model_ref = make_ref(ComponentKind::Model, experiment.model.name);
  spec.attack_ref = make_ref(ComponentKind::Attack, experiment.attack.name);
  spec.dataset_ref = make_ref(ComponentKind::Dataset, experiment.dataset.name);
  for (const auto& defense : experiment.defenses) {
    spec.defense_refs.push_back(make_ref(ComponentKind::Defense, defense.name));
  }
  for (const auto& judger : experiment.judgers) {
    spec.judger_refs.push_back(make_ref(ComponentKind::Judger, judger.name));
  }

  experiment.model_config =
      parse_model_config(experiment.model.name, experiment.model.document);
  experiment.attack_config =
      parse_attack_config(experiment.attack.name, experiment.attack.document);
  for (const auto& defense : experiment.defenses) {
    experiment.defense_configs.push_back(
        parse_defense_config(defense.name, defense.document, defense.origin_dir));
  }
  experiment.dataset_config = parse_dataset_config(
      experiment.dataset.name, experiment.dataset.document, experiment.dataset.origin_dir);
  for (const auto& judger : experiment.judgers) {
    experiment.judger_configs.push_back(
        parse_judger_config(judger.name, judger.document, judger.origin_dir));
  }
  return experiment;
}

}  // namespace redeval
