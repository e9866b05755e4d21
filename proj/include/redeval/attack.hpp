#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "redeval/capability.hpp"
#include "redeval/defense.hpp"
#include "redeval/ledger.hpp"
#include "redeval/model.hpp"
#include "redeval/taxonomy.hpp"
#include "redeval/text_templates.hpp"

namespace redeval {

enum class AttackKind { Identity, Flip, Encoding, TemplateWrap, IterativeRefinement };

AttackKind attack_kind_from_string(std::string_view name);
const char* to_string(AttackKind kind);

struct AttackConfig {
  std::string name;
  AttackKind kind = AttackKind::Identity;
  nlohmann::json parameters = nlohmann::json::object();
  CapabilitySet required_capabilities;
  std::map<std::string, std::string> aux_model_refs;
  std::vector<TaxonomyTag> tags;  // every registered attack carries >= 1
};

struct TranscriptEntry {
  std::string role;
  std::string content;
};

struct AttackResult {
  std::string adversarial_prompt;
  std::vector<TranscriptEntry> transcript;
  QueryLedger ledger_delta;  // attacker_aux / judger_aux / target roles only
  std::optional<bool> succeeded_early;
};

// Attack with its template store and auxiliary backends resolved.
struct ResolvedAttack {
  AttackConfig config;
  const TemplateStore* templates = nullptr;
  std::shared_ptr<ModelBackend> attacker_aux;
  std::shared_ptr<ModelBackend> judge_aux;  // defaults to attacker_aux
};

// Produces the adversarial prompt for a goal. All model calls spent during
// construction, including auxiliary attacker/judger calls and queries to the
// guarded target, land in ledger_delta; when budget_limit is set,
// ledger_delta.total() never exceeds it. From the attacker's side the
// guarded model is opaque, so everything it spends internally is accounted
// as target queries.
AttackResult craft(const ResolvedAttack& attack, const std::string& goal,
                   const GuardedModel& target, std::uint64_t seed,
                   std::optional<std::uint64_t> budget_limit);

// Substitutes the payload into a stored template; the template must contain
// the placeholder exactly once.
std::string wrap_template(const TemplateStore& store, const std::string& template_id,
                          std::string_view payload);

}  // namespace redeval
