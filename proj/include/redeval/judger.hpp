#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "redeval/ledger.hpp"
#include "redeval/model.hpp"
#include "redeval/types.hpp"

namespace redeval {

enum class JudgerKind { RejectionPrefix, TemplateBinary, TemplateGraded };

constexpr const char* to_string(JudgerKind kind) {
  switch (kind) {
    case JudgerKind::RejectionPrefix: return "rejection_prefix";
    case JudgerKind::TemplateBinary: return "template_binary";
    case JudgerKind::TemplateGraded: return "template_graded";
  }
  return "unknown";
}

JudgerKind judger_kind_from_string(std::string_view name);

struct JudgerConfig {
  std::string name;
  JudgerKind kind = JudgerKind::RejectionPrefix;
  std::vector<std::string> refusal_cues;  // rejection_prefix
  std::size_t cue_window = 128;           // refusal cues are prefix phenomena
  std::string template_id;                // template kinds
  std::string parse_rule;                 // "yes_no" | "first_integer"
  int scale_min = 1;
  int scale_max = 5;
  int threshold = 5;  // binary = 1 iff score >= threshold; default strict
  std::string judge_model_ref;  // template kinds; switching judges is a config change
};

struct JudgementInput {
  std::string goal;
  std::string adversarial_prompt;
  std::string response;  // present, possibly empty
};

// Judger with its prompt text and judge backend resolved.
struct ResolvedJudger {
  JudgerConfig config;
  std::string template_text;
  std::shared_ptr<ModelBackend> judge_model;  // null for rule-based judgers
};

// Binary adjudication; template kinds spend judger_aux calls, rule-based
// judgers never touch the ledger.
Verdict judge(const ResolvedJudger& judger, const JudgementInput& input,
              QueryLedger& ledger);

struct BatchItemResult {
  std::optional<Verdict> verdict;
  std::string error_kind;
  std::string error_message;

  bool ok() const { return verdict.has_value(); }
};

// Order-preserving batch evaluation; per-item errors become failure markers
// instead of aborting the batch.
std::vector<BatchItemResult> judge_batch(const ResolvedJudger& judger,
                                         const std::vector<JudgementInput>& inputs,
                                         QueryLedger& ledger);

// True iff any cue occurs case-insensitively within the first `window`
// characters of the response.
bool matches_refusal_cue(std::string_view response,
                         const std::vector<std::string>& cues,
                         std::size_t window = 128);

// Cue list shipped as a data file, one phrase per line; '#' lines are comments.
std::vector<std::string> load_refusal_cues(const std::filesystem::path& path);
std::vector<std::string> default_refusal_cues();

}  // namespace redeval
