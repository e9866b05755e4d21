#include "redeval/defense.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "redeval/data_dir.hpp"
#include "redeval/hash.hpp"
#include "redeval/judger.hpp"
#include "redeval/text_templates.hpp"
#include "redeval/unicode.hpp"

namespace redeval {

namespace {

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string format_score(double score) {
  std::ostringstream out;
  out.precision(6);
  out << score;
  return out.str();
}

std::string user_text(const GenerationRequest& request) {
  std::string joined;
  for (const auto& message : request.messages) {
    if (message.role == MessageRole::User) {
      if (!joined.empty()) joined.push_back('\n');
      joined += message.content;
    }
  }
  return joined;
}

}  // namespace

DefenseLocus defense_locus_from_string(std::string_view name) {
  if (name == "input") return DefenseLocus::Input;
  if (name == "model") return DefenseLocus::Model;
  if (name == "output") return DefenseLocus::Output;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown defense locus: " + std::string(name));
}

DefenseKind defense_kind_from_string(std::string_view name) {
  if (name == "none") return DefenseKind::None;
  if (name == "input_keyword_filter") return DefenseKind::InputKeywordFilter;
  if (name == "safety_prompt") return DefenseKind::SafetyPrompt;
  if (name == "perplexity_filter") return DefenseKind::PerplexityFilter;
  if (name == "backtranslation") return DefenseKind::Backtranslation;
  if (name == "smoothing_vote") return DefenseKind::SmoothingVote;
  if (name == "output_keyword_filter") return DefenseKind::OutputKeywordFilter;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown defense kind: " + std::string(name));
}

const char* to_string(DefenseLocus locus) {
  switch (locus) {
    case DefenseLocus::Input: return "input";
    case DefenseLocus::Model: return "model";
    case DefenseLocus::Output: return "output";
  }
  return "unknown";
}

const char* to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::None: return "none";
    case DefenseKind::InputKeywordFilter: return "input_keyword_filter";
    case DefenseKind::SafetyPrompt: return "safety_prompt";
    case DefenseKind::PerplexityFilter: return "perplexity_filter";
    case DefenseKind::Backtranslation: return "backtranslation";
    case DefenseKind::SmoothingVote: return "smoothing_vote";
    case DefenseKind::OutputKeywordFilter: return "output_keyword_filter";
  }
  return "unknown";
}

double perplexity_score(const std::vector<double>& logprobs) {
  if (logprobs.empty()) {
    throw FrameworkError(ErrorKind::Validation,
                         "perplexity_score requires a non-empty logprob list");
  }
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return -sum / static_cast<double>(logprobs.size());
}

bool blocklist_hit(std::string_view text, const std::vector<std::string>& terms,
                   std::string* matched) {
  const std::string haystack = lowercase(text);
  for (const auto& term : terms) {
    if (term.empty()) continue;
    std::size_t pos = 0;
    while ((pos = haystack.find(term, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
      const std::size_t end = pos + term.size();
      const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
      if (left_ok && right_ok) {
        if (matched) *matched = term;
        return true;
      }
      ++pos;
    }
  }
  return false;
}

std::vector<std::string> load_blocklist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FrameworkError(ErrorKind::Validation,
                         "cannot read blocklist: " + path.string());
  }
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    terms.push_back(lowercase(line));
  }
  return terms;
}

std::string perturb_text(std::string_view text, double q, std::uint64_t seed) {
  if (q <= 0.0) return std::string(text);
  SplitMix64 rng(seed);
  std::string out;
  out.reserve(text.size());
  for (std::string_view span : utf8_spans(text)) {
    if (rng.next_unit() < q) {
      out.push_back(static_cast<char>(0x20 + rng.next() % 95));
    } else {
      out.append(span);
    }
  }
  return out;
}

ResolvedDefense ResolvedDefense::resolve(const DefenseConfig& config,
                                         const std::filesystem::path& origin_dir,
                                         std::shared_ptr<ModelBackend> aux_backend) {
  ResolvedDefense resolved;
  resolved.config = config;
  resolved.aux = std::move(aux_backend);
  const nlohmann::json& params = config.parameters;

  auto load_terms = [&](const char* inline_key, const char* path_key)
      -> std::vector<std::string> {
    if (params.contains(inline_key)) {
      std::vector<std::string> terms;
      for (const auto& term : params.at(inline_key)) {
        terms.push_back(lowercase(term.get<std::string>()));
      }
      return terms;
    }
    if (params.contains(path_key)) {
      return load_blocklist(
          resolve_data_path(params.at(path_key).get<std::string>(), origin_dir));
    }
    throw FrameworkError(ErrorKind::Validation,
                         "defense '" + config.name + "' needs " + inline_key +
                             " or " + path_key);
  };

  switch (config.kind) {
    case DefenseKind::None:
      break;
    case DefenseKind::InputKeywordFilter:
    case DefenseKind::OutputKeywordFilter:
      resolved.blocklist = load_terms("blocklist", "blocklist_path");
      break;
    case DefenseKind::SafetyPrompt: {
      if (params.contains("text")) {
        resolved.prompt_template = params.at("text").get<std::string>();
      } else if (params.contains("template_path")) {
        resolved.prompt_template = read_text_file(resolve_data_path(
            params.at("template_path").get<std::string>(), origin_dir));
      } else {
        throw FrameworkError(ErrorKind::Validation,
                             "safety_prompt needs text or template_path");
      }
      break;
    }
    case DefenseKind::PerplexityFilter: {
      resolved.perplexity_threshold = params.value("threshold", 5.0);
      resolved.scored_text = params.value("scored_text", "input");
      if (resolved.scored_text != "input" && resolved.scored_text != "output") {
        throw FrameworkError(ErrorKind::Validation,
                             "perplexity scored_text must be input or output");
      }
      break;
    }
    case DefenseKind::Backtranslation: {
      if (config.locus != DefenseLocus::Output) {
        throw FrameworkError(ErrorKind::Validation,
                             "backtranslation runs at the output locus (it needs "
                             "the draft response)");
      }
      if (!resolved.aux) {
        throw FrameworkError(ErrorKind::Validation,
                             "backtranslation requires a defense_aux model");
      }
      const std::string path = params.value(
          "template_path", std::string("defense_templates/backtranslation.txt"));
      resolved.prompt_template = read_text_file(resolve_data_path(path, origin_dir));
      resolved.blocklist = load_terms("blocklist", "blocklist_path");
      break;
    }
    case DefenseKind::SmoothingVote: {
      resolved.smoothing_k = params.value("k", 3);
      resolved.smoothing_q = params.value("q", 0.1);
      if (resolved.smoothing_k < 1) {
        throw FrameworkError(ErrorKind::Validation, "smoothing k must be >= 1");
      }
      if (resolved.smoothing_q < 0.0 || resolved.smoothing_q > 1.0) {
        throw FrameworkError(ErrorKind::Validation, "smoothing q must be in [0,1]");
      }
      if (params.contains("refusal_cues")) {
        for (const auto& cue : params.at("refusal_cues")) {
          resolved.refusal_cues.push_back(cue.get<std::string>());
        }
      } else {
        resolved.refusal_cues = load_refusal_cues(resolve_data_path(
            params.value("refusal_cues_path", std::string("refusal_cues.txt")),
            origin_dir));
      }
      break;
    }
  }

  // Kind pins the locus for every stage except the perplexity filter, whose
  // locus follows the configured scored text.
  const auto expect_locus = [&]() -> std::optional<DefenseLocus> {
    switch (config.kind) {
      case DefenseKind::InputKeywordFilter:
      case DefenseKind::SafetyPrompt:
        return DefenseLocus::Input;
      case DefenseKind::SmoothingVote:
        return DefenseLocus::Model;
      case DefenseKind::OutputKeywordFilter:
      case DefenseKind::Backtranslation:
        return DefenseLocus::Output;
      case DefenseKind::PerplexityFilter:
        return resolved.scored_text == "input" ? DefenseLocus::Input
                                               : DefenseLocus::Output;
      case DefenseKind::None:
        return std::nullopt;
    }
    return std::nullopt;
  }();
  if (expect_locus && config.locus != *expect_locus) {
    throw FrameworkError(ErrorKind::Validation,
                         "defense '" + config.name + "' of kind " +
                             to_string(config.kind) + " must declare locus " +
                             to_string(*expect_locus));
  }

  return resolved;
}

GuardedModel::GuardedModel(std::shared_ptr<ModelBackend> backend,
                           std::vector<ResolvedDefense> defenses,
                           DefenseComposition composition, std::string refusal_text)
    : backend_(std::move(backend)),
      defenses_(std::move(defenses)),
      composition_(composition),
      refusal_text_(std::move(refusal_text)) {
  if (!backend_) {
    throw FrameworkError(ErrorKind::Validation, "guarded model needs a backend");
  }
  int model_stages = 0;
  for (const auto& defense : defenses_) {
    if (defense.config.kind == DefenseKind::SmoothingVote) ++model_stages;
    if (defense.config.kind == DefenseKind::PerplexityFilter &&
        !backend_->config().capabilities.contains(Capability::WhiteBoxLogprobs)) {
      throw FrameworkError(ErrorKind::Validation,
                           "perplexity filter requires white_box_logprobs on the "
                           "guarded backend");
    }
  }
  if (model_stages > 1) {
    throw FrameworkError(ErrorKind::Validation,
                         "at most one model-locus defense per pipeline");
  }
}

DefenseOutcome GuardedModel::generate(const GenerationRequest& request,
                                      std::uint64_t seed, QueryLedger& ledger) const {
  validate_request(request);

  if (composition_ == DefenseComposition::Cascade || defenses_.size() <= 1) {
    std::vector<const ResolvedDefense*> stages;
    stages.reserve(defenses_.size());
    for (const auto& defense : defenses_) stages.push_back(&defense);
    DefenseOutcome outcome;
    outcome.ledger_delta.set_budget_cap(ledger.remaining_budget());
    try {
      run_pipeline(stages, request, seed, outcome);
    } catch (...) {
      // Partial spend still counts, even when the pipeline fails.
      ledger.merge(outcome.ledger_delta);
      throw;
    }
    ledger.merge(outcome.ledger_delta);
    return outcome;
  }

  // Parallel composition: every defense runs as an independent pipeline on
  // the same request; any refusing branch refuses the whole call.
  DefenseOutcome joined;
  bool any_refused = false;
  std::string first_answer;
  bool have_answer = false;
  for (std::size_t b = 0; b < defenses_.size(); ++b) {
    std::vector<const ResolvedDefense*> branch = {&defenses_[b]};
    const std::uint64_t branch_seed =
        derive_seed(seed, "branch", std::to_string(b));
    std::uint64_t branch_budget = ledger.remaining_budget();
    if (branch_budget != UINT64_MAX) {
      const std::uint64_t spent = joined.ledger_delta.total();
      branch_budget = branch_budget > spent ? branch_budget - spent : 0;
    }
    DefenseOutcome outcome;
    outcome.ledger_delta.set_budget_cap(branch_budget);
    try {
      run_pipeline(branch, request, branch_seed, outcome);
    } catch (...) {
      joined.ledger_delta.merge(outcome.ledger_delta);
      ledger.merge(joined.ledger_delta);
      throw;
    }
    joined.ledger_delta.merge(outcome.ledger_delta);
    const std::string prefix = "branch" + std::to_string(b) + "/";
    for (auto& entry : outcome.stage_trace) {
      entry.stage = prefix + entry.stage;
      joined.stage_trace.push_back(std::move(entry));
    }
    if (outcome.refused_by_defense) {
      any_refused = true;
    } else if (!have_answer) {
      first_answer = outcome.final_text;
      have_answer = true;
    }
  }
  joined.refused_by_defense = any_refused;
  joined.final_text = any_refused ? refusal_text_ : first_answer;
  ledger.merge(joined.ledger_delta);
  return joined;
}

void GuardedModel::run_pipeline(const std::vector<const ResolvedDefense*>& stages,
                                const GenerationRequest& request, std::uint64_t seed,
                                DefenseOutcome& outcome) const {
  GenerationRequest working = request;

  auto refuse = [&](const ResolvedDefense& stage, const std::string& detail) {
    outcome.stage_trace.push_back({stage.config.name, StageAction::Refuse, detail});
    outcome.refused_by_defense = true;
    outcome.final_text = refusal_text_;
  };

  auto probe_perplexity = [&](const std::string& text) -> std::optional<double> {
    GenerationRequest probe;
    probe.messages.push_back({MessageRole::User, text});
    probe.decoding = working.decoding;
    probe.decoding.logprobs_requested = true;
    probe.caller_role = QueryRole::DefenseAux;
    GenerationResponse response = backend_->generate(probe, outcome.ledger_delta);
    if (!response.token_logprobs || response.token_logprobs->empty()) {
      return std::nullopt;
    }
    std::vector<double> logprobs;
    logprobs.reserve(response.token_logprobs->size());
    for (const auto& tl : *response.token_logprobs) logprobs.push_back(tl.logprob);
    return perplexity_score(logprobs);
  };

  // Input stages, in configuration order.
  for (const ResolvedDefense* stage : stages) {
    if (stage->config.locus != DefenseLocus::Input ||
        stage->config.kind == DefenseKind::None) {
      continue;
    }
    switch (stage->config.kind) {
      case DefenseKind::InputKeywordFilter: {
        std::string matched;
        if (blocklist_hit(user_text(working), stage->blocklist, &matched)) {
          refuse(*stage, "blocklist term '" + matched + "'");
          return;
        }
        outcome.stage_trace.push_back({stage->config.name, StageAction::Pass, ""});
        break;
      }
      case DefenseKind::SafetyPrompt: {
        const std::string safety_text = substitute_placeholders(
            stage->prompt_template, {{kPayloadPlaceholder, user_text(working)}});
        if (!working.messages.empty() &&
            working.messages.front().role == MessageRole::System) {
          working.messages.front().content =
              safety_text + "\n\n" + working.messages.front().content;
        } else {
          working.messages.insert(working.messages.begin(),
                                  {MessageRole::System, safety_text});
        }
        outcome.stage_trace.push_back(
            {stage->config.name, StageAction::Rewrite, "safety system message"});
        break;
      }
      case DefenseKind::PerplexityFilter: {
        const auto score = probe_perplexity(user_text(working));
        if (score && *score > stage->perplexity_threshold) {
          refuse(*stage, "perplexity " + format_score(*score) + " > " +
                                    format_score(stage->perplexity_threshold));
          return;
        }
        outcome.stage_trace.push_back(
            {stage->config.name, StageAction::Pass,
             score ? "perplexity " + format_score(*score) : "no tokens"});
        break;
      }
      default:
        throw FrameworkError(ErrorKind::Validation,
                             "defense kind not runnable at input locus");
    }
  }

  // Generation, through the model-locus stage when one is configured.
  const ResolvedDefense* model_stage = nullptr;
  for (const ResolvedDefense* stage : stages) {
    if (stage->config.locus == DefenseLocus::Model &&
        stage->config.kind == DefenseKind::SmoothingVote) {
      model_stage = stage;
    }
  }

  std::string text;
  if (model_stage) {
    const int k = model_stage->smoothing_k;
    int refusals = 0;
    std::vector<std::string> responses(static_cast<std::size_t>(k));
    std::vector<bool> refused(static_cast<std::size_t>(k), false);
    for (int copy = 0; copy < k; ++copy) {
      GenerationRequest perturbed = working;
      const std::uint64_t copy_seed = derive_seed(seed, "smooth", std::to_string(copy));
      SplitMix64 stream(copy_seed);
      for (auto& message : perturbed.messages) {
        if (message.role == MessageRole::User) {
          message.content =
              perturb_text(message.content, model_stage->smoothing_q, stream.next());
        }
      }
      GenerationResponse response = backend_->generate(perturbed, outcome.ledger_delta);
      responses[static_cast<std::size_t>(copy)] = response.text;
      const bool copy_refused =
          matches_refusal_cue(response.text, model_stage->refusal_cues);
      refused[static_cast<std::size_t>(copy)] = copy_refused;
      if (copy_refused) ++refusals;
    }
    // Majority vote, ties broken conservatively.
    if (2 * refusals >= k) {
      refuse(*model_stage, "vote " + std::to_string(refusals) + "/" +
                               std::to_string(k) + " refusals");
      return;
    }
    for (int copy = 0; copy < k; ++copy) {
      if (!refused[static_cast<std::size_t>(copy)]) {
        text = responses[static_cast<std::size_t>(copy)];
        break;
      }
    }
    outcome.stage_trace.push_back(
        {model_stage->config.name, StageAction::Pass,
         "vote " + std::to_string(refusals) + "/" + std::to_string(k) + " refusals"});
  } else {
    GenerationResponse response = backend_->generate(working, outcome.ledger_delta);
    text = response.text;
    outcome.stage_trace.push_back({"generate", StageAction::Pass, response.finish_reason});
  }

  // Output stages, in configuration order.
  for (const ResolvedDefense* stage : stages) {
    if (stage->config.locus != DefenseLocus::Output ||
        stage->config.kind == DefenseKind::None) {
      continue;
    }
    switch (stage->config.kind) {
      case DefenseKind::OutputKeywordFilter: {
        std::string matched;
        if (blocklist_hit(text, stage->blocklist, &matched)) {
          refuse(*stage, "blocklist term '" + matched + "'");
          return;
        }
        outcome.stage_trace.push_back({stage->config.name, StageAction::Pass, ""});
        break;
      }
      case DefenseKind::PerplexityFilter: {
        const auto score = probe_perplexity(text);
        if (score && *score > stage->perplexity_threshold) {
          refuse(*stage, "perplexity " + format_score(*score) + " > " +
                                    format_score(stage->perplexity_threshold));
          return;
        }
        outcome.stage_trace.push_back(
            {stage->config.name, StageAction::Pass,
             score ? "perplexity " + format_score(*score) : "no tokens"});
        break;
      }
      case DefenseKind::Backtranslation: {
        GenerationRequest infer;
        infer.messages.push_back(
            {MessageRole::User,
             substitute_placeholders(stage->prompt_template,
                                     {{kPayloadPlaceholder, text}})});
        infer.decoding = working.decoding;
        infer.caller_role = QueryRole::DefenseAux;
        GenerationResponse inferred = stage->aux->generate(infer, outcome.ledger_delta);
        std::string matched;
        if (blocklist_hit(inferred.text, stage->blocklist, &matched)) {
          refuse(*stage, "inferred prompt hit blocklist term '" + matched + "'");
          return;
        }
        outcome.stage_trace.push_back(
            {stage->config.name, StageAction::Pass, "inferred prompt clean"});
        break;
      }
      default:
        throw FrameworkError(ErrorKind::Validation,
                             "defense kind not runnable at output locus");
    }
  }

  outcome.final_text = text;
}

}  // namespace redeval
