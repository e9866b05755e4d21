#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "redeval/attack.hpp"
#include "redeval/dataset.hpp"
#include "redeval/defense.hpp"
#include "redeval/judger.hpp"
#include "redeval/model.hpp"
#include "redeval/types.hpp"

namespace redeval {

struct RegistryEntry {
  ComponentKind kind = ComponentKind::Model;
  std::string name;
  nlohmann::json document;
  std::string origin;  // "builtin" or the source file path
  std::filesystem::path origin_dir;
  std::uint64_t version_hash = 0;
};

// Immutable-after-discovery component store. Built-ins live under reserved
// "builtin." names so user files cannot shadow them.
class Registry {
 public:
  static Registry with_builtins();

  // Validates the document with the kind-specific parser before admission;
  // duplicate (kind, name) is a Validation error naming both origins.
  void add(ComponentKind kind, const std::string& name, nlohmann::json document,
           const std::string& origin);

  const RegistryEntry* find(ComponentKind kind, std::string_view name) const;

  std::vector<const RegistryEntry*> entries() const;

 private:
  std::map<std::pair<ComponentKind, std::string>, RegistryEntry> entries_;
};

// Scans models/, attacks/, defenses/, datasets/, judgers/ subdirectories for
// *.json component documents and merges them over the built-ins.
Registry discover(const std::filesystem::path& config_dir);

// Kind-specific component parsers; throw Validation on malformed documents.
// Relative file paths inside documents are made absolute against origin_dir
// (falling back to the data dir) so resolved configs replay standalone.
ModelConfig parse_model_config(const std::string& name, const nlohmann::json& doc);
AttackConfig parse_attack_config(const std::string& name, const nlohmann::json& doc);
DefenseConfig parse_defense_config(const std::string& name, nlohmann::json doc,
                                   const std::filesystem::path& origin_dir);
DatasetConfig parse_dataset_config(const std::string& name, nlohmann::json doc,
                                   const std::filesystem::path& origin_dir);
JudgerConfig parse_judger_config(const std::string& name, nlohmann::json doc,
                                 const std::filesystem::path& origin_dir);

// Top-level shallow merge of inline overrides over a registered document.
nlohmann::json shallow_merge(const nlohmann::json& base, const nlohmann::json& overrides);

std::string version_hex(const nlohmann::json& document);

}  // namespace redeval
