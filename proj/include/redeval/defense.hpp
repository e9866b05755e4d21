#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "redeval/capability.hpp"
#include "redeval/ledger.hpp"
#include "redeval/model.hpp"
#include "redeval/taxonomy.hpp"
#include "redeval/types.hpp"

namespace redeval {

enum class DefenseLocus { Input, Model, Output };
enum class DefenseKind {
  None,
  InputKeywordFilter,
  SafetyPrompt,
  PerplexityFilter,
  Backtranslation,
  SmoothingVote,
  OutputKeywordFilter,
};

DefenseLocus defense_locus_from_string(std::string_view name);
DefenseKind defense_kind_from_string(std::string_view name);
const char* to_string(DefenseLocus locus);
const char* to_string(DefenseKind kind);

struct DefenseConfig {
  std::string name;
  DefenseLocus locus = DefenseLocus::Input;
  DefenseKind kind = DefenseKind::None;
  nlohmann::json parameters = nlohmann::json::object();
  std::map<std::string, std::string> aux_model_refs;
  CapabilitySet required_capabilities;
  std::vector<TaxonomyTag> tags;
};

enum class StageAction { Pass, Rewrite, Refuse };

constexpr const char* to_string(StageAction action) {
  switch (action) {
    case StageAction::Pass: return "pass";
    case StageAction::Rewrite: return "rewrite";
    case StageAction::Refuse: return "refuse";
  }
  return "unknown";
}

struct StageTraceEntry {
  std::string stage;
  StageAction action = StageAction::Pass;
  std::string detail;
};

struct DefenseOutcome {
  std::string final_text;
  bool refused_by_defense = false;  // true => final_text is the canonical refusal
  std::vector<StageTraceEntry> stage_trace;
  QueryLedger ledger_delta;
};

inline constexpr const char* kDefaultRefusalText =
    "I'm sorry, but I can't help with that.";

// Defense with parameters materialized: blocklists loaded, templates read,
// aux backend resolved.
struct ResolvedDefense {
  DefenseConfig config;
  std::vector<std::string> blocklist;
  std::string prompt_template;            // safety prompt / backtranslation text
  std::vector<std::string> refusal_cues;  // smoothing vote detector
  double perplexity_threshold = 5.0;
  std::string scored_text = "input";  // perplexity: "input" | "output"
  int smoothing_k = 3;
  double smoothing_q = 0.1;
  std::shared_ptr<ModelBackend> aux;

  static ResolvedDefense resolve(const DefenseConfig& config,
                                 const std::filesystem::path& origin_dir,
                                 std::shared_ptr<ModelBackend> aux_backend);
};

// Mean negative log-probability per token; the filter refuses when the score
// exceeds its threshold.
double perplexity_score(const std::vector<double>& logprobs);

// Case-insensitive word-boundary scan of lowercase blocklist terms.
bool blocklist_hit(std::string_view text, const std::vector<std::string>& terms,
                   std::string* matched = nullptr);

std::vector<std::string> load_blocklist(const std::filesystem::path& path);

// Defender-controlled wrapper: every request runs the standardized pipeline
// (input stages, one generation through the model stage or the raw backend,
// output stages); the first refusal short-circuits with the canonical
// refusal text.
class GuardedModel {
 public:
  GuardedModel(std::shared_ptr<ModelBackend> backend,
               std::vector<ResolvedDefense> defenses,
               DefenseComposition composition = DefenseComposition::Cascade,
               std::string refusal_text = kDefaultRefusalText);

  DefenseOutcome generate(const GenerationRequest& request, std::uint64_t seed,
                          QueryLedger& ledger) const;

  ModelBackend& backend() const { return *backend_; }
  const std::string& refusal_text() const { return refusal_text_; }

 private:
  // Fills the passed outcome in place so partial ledger spend survives a
  // mid-pipeline exception.
  void run_pipeline(const std::vector<const ResolvedDefense*>& stages,
                    const GenerationRequest& request, std::uint64_t seed,
                    DefenseOutcome& outcome) const;

  std::shared_ptr<ModelBackend> backend_;
  std::vector<ResolvedDefense> defenses_;
  DefenseComposition composition_;
  std::string refusal_text_;
};

// SmoothLLM-style randomized smoothing: each character of the user messages
// is independently replaced with a uniform printable ASCII character with
// probability q, k copies are generated, and a majority vote over the
// refusal detector decides (ties refuse).
std::string perturb_text(std::string_view text, double q, std::uint64_t seed);

}  // namespace redeval
