#include "redeval/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "redeval/attack.hpp"
#include "redeval/data_dir.hpp"
#include "redeval/dataset.hpp"
#include "redeval/defense.hpp"
#include "redeval/hash.hpp"
#include "redeval/judger.hpp"
#include "redeval/version.hpp"

namespace redeval {

namespace {

using nlohmann::json;

std::string u64_hex(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(value));
  return buffer;
}

json ledger_to_json(const QueryLedger& ledger) {
  json out;
  for (QueryRole role : kAllQueryRoles) {
    out[to_string(role)] = ledger.count(role);
  }
  out["failed_calls"] = ledger.failed_calls();
  out["total"] = ledger.total();
  return out;
}

json environment_fingerprint() {
  return json{{"tool", "redeval"},
              {"tool_version", kToolVersion},
              {"platform", kPlatform}};
}

// Everything resolved and instantiated for execution.
struct ExecutionContext {
  const ValidatedExperiment* experiment = nullptr;
  std::shared_ptr<ModelBackend> target_backend;
  std::map<std::string, std::shared_ptr<ModelBackend>> aux_backends;
  std::unique_ptr<GuardedModel> guarded;
  std::unique_ptr<TemplateStore> attack_templates;
  std::unique_ptr<TemplateStore> judger_templates;
  ResolvedAttack attack;
  std::vector<ResolvedJudger> judgers;
  std::vector<std::string> refusal_cues;  // for the refusal-rate metric
};

void enforce_live_gate(const ValidatedExperiment& experiment, bool allow_live) {
  std::vector<const ModelConfig*> configs;
  std::vector<ModelConfig> parsed;
  parsed.push_back(experiment.model_config);
  for (const auto& [name, component] : experiment.aux_models) {
    parsed.push_back(parse_model_config(component.name, component.document));
  }
  for (const auto& config : parsed) {
    if (config.kind != BackendKind::Mock && !allow_live) {
      throw FrameworkError(ErrorKind::Validation,
                           "model '" + config.name +
                               "' is a live endpoint; pass --allow-live to run "
                               "against non-mock backends");
    }
  }
}

std::shared_ptr<ModelBackend> aux_backend_for(const ExecutionContext& ctx,
                                              const std::map<std::string, std::string>& refs,
                                              const std::string& role) {
  auto ref = refs.find(role);
  if (ref == refs.end()) return nullptr;
  auto backend = ctx.aux_backends.find(ref->second);
  if (backend == ctx.aux_backends.end()) {
    throw FrameworkError(ErrorKind::Validation,
                         "aux model '" + ref->second + "' was not resolved");
  }
  return backend->second;
}

ExecutionContext build_context(const ValidatedExperiment& experiment,
                               const RunOptions& options) {
  enforce_live_gate(experiment, options.allow_live);

  ExecutionContext ctx;
  ctx.experiment = &experiment;
  ctx.target_backend = make_backend(experiment.model_config);
  for (const auto& [name, component] : experiment.aux_models) {
    ctx.aux_backends.emplace(
        name, make_backend(parse_model_config(component.name, component.document)));
  }

  std::vector<ResolvedDefense> defenses;
  for (std::size_t i = 0; i < experiment.defense_configs.size(); ++i) {
    const DefenseConfig& config = experiment.defense_configs[i];
    if (config.kind == DefenseKind::None) continue;
    defenses.push_back(ResolvedDefense::resolve(
        config, experiment.defenses[i].origin_dir,
        aux_backend_for(ctx, config.aux_model_refs, "defense_aux")));
  }
  ctx.guarded = std::make_unique<GuardedModel>(
      ctx.target_backend, std::move(defenses), experiment.spec.defense_composition,
      experiment.spec.refusal_text.empty() ? kDefaultRefusalText
                                           : experiment.spec.refusal_text);

  ctx.attack_templates = std::make_unique<TemplateStore>(data_dir() / "attack_templates");
  ctx.judger_templates = std::make_unique<TemplateStore>(data_dir() / "judger_templates");

  ctx.attack.config = experiment.attack_config;
  ctx.attack.templates = ctx.attack_templates.get();
  ctx.attack.attacker_aux =
      aux_backend_for(ctx, experiment.attack_config.aux_model_refs, "attacker_aux");
  ctx.attack.judge_aux =
      aux_backend_for(ctx, experiment.attack_config.aux_model_refs, "judger_aux");

  for (const auto& config : experiment.judger_configs) {
    ResolvedJudger judger;
    judger.config = config;
    if (config.kind != JudgerKind::RejectionPrefix) {
      judger.template_text = ctx.judger_templates->raw(config.template_id);
      auto backend = ctx.aux_backends.find(config.judge_model_ref);
      if (backend == ctx.aux_backends.end()) {
        throw FrameworkError(ErrorKind::Validation,
                             "judge model '" + config.judge_model_ref +
                                 "' was not resolved");
      }
      judger.judge_model = backend->second;
    }
    ctx.judgers.push_back(std::move(judger));
  }

  ctx.refusal_cues = default_refusal_cues();
  return ctx;
}

json versions_json(const ValidatedExperiment& experiment) {
  json defenses = json::array();
  for (const auto& defense : experiment.defenses) defenses.push_back(defense.version);
  json judgers;
  for (const auto& judger : experiment.judgers) judgers[judger.name] = judger.version;
  return json{{"attack", experiment.attack.version},
              {"dataset", experiment.dataset.version},
              {"defenses", std::move(defenses)},
              {"judgers", std::move(judgers)},
              {"model", experiment.model.version}};
}

struct SampleOutcome {
  json record;
  double duration_ms = 0.0;
};

SampleOutcome evaluate_sample(const ExecutionContext& ctx, const SampleRecord& sample,
                              const json& versions) {
  const ExperimentSpec& spec = ctx.experiment->spec;
  const auto started = std::chrono::steady_clock::now();

  QueryLedger ledger;
  const std::uint64_t attack_seed = derive_seed(spec.root_seed, "attack", sample.sample_id);
  const std::uint64_t defense_seed =
      derive_seed(spec.root_seed, "defense", sample.sample_id);
  const std::uint64_t decode_seed =
      spec.decoding.seed ? *spec.decoding.seed
                         : derive_seed(spec.root_seed, "decode", sample.sample_id);

  SampleOutcome outcome;
  try {
    AttackResult crafted =
        craft(ctx.attack, sample.prompt, *ctx.guarded, attack_seed, spec.budget_limit);
    ledger.merge(crafted.ledger_delta);

    GenerationRequest request;
    request.messages.push_back({MessageRole::User, crafted.adversarial_prompt});
    request.decoding = spec.decoding;
    request.decoding.seed = decode_seed;
    request.caller_role = QueryRole::Target;
    DefenseOutcome defended = ctx.guarded->generate(request, defense_seed, ledger);

    JudgementInput input{sample.prompt, crafted.adversarial_prompt, defended.final_text};
    json verdicts;
    for (const auto& judger : ctx.judgers) {
      const Verdict verdict = judge(judger, input, ledger);
      json entry{{"binary", verdict.binary},
                 {"judger_id", verdict.judger_id},
                 {"raw_output", verdict.raw_judger_output}};
      entry["graded"] = verdict.graded ? json(*verdict.graded) : json(nullptr);
      verdicts[judger.config.name] = std::move(entry);
    }

    const bool refusal =
        defended.refused_by_defense ||
        matches_refusal_cue(defended.final_text, ctx.refusal_cues);

    json trace = json::array();
    for (const auto& entry : defended.stage_trace) {
      trace.push_back(json{{"action", to_string(entry.action)},
                           {"detail", entry.detail},
                           {"stage", entry.stage}});
    }

    outcome.record = json{{"adversarial_prompt", crafted.adversarial_prompt},
                          {"experiment_id", spec.experiment_id},
                          {"final_response", defended.final_text},
                          {"goal", sample.prompt},
                          {"ledger", ledger_to_json(ledger)},
                          {"refusal", refusal},
                          {"refused_by_defense", defended.refused_by_defense},
                          {"sample_id", sample.sample_id},
                          {"seeds",
                           json{{"attack", attack_seed},
                                {"decode", decode_seed},
                                {"defense", defense_seed}}},
                          {"stage_trace", std::move(trace)},
                          {"verdicts", std::move(verdicts)},
                          {"versions", versions}};
  } catch (const FrameworkError& err) {
    if (err.kind() == ErrorKind::Validation) throw;  // configuration bug: abort the run
    outcome.record = json{{"error",
                           json{{"kind", to_string(err.kind())},
                                {"message", err.what()}}},
                          {"experiment_id", spec.experiment_id},
                          {"failed", true},
                          {"ledger", ledger_to_json(ledger)},
                          {"sample_id", sample.sample_id}};
  }

  const auto finished = std::chrono::steady_clock::now();
  outcome.duration_ms =
      std::chrono::duration<double, std::milli>(finished - started).count();
  return outcome;
}

MetricsSummary summarize_records(const std::vector<json>& records,
                                 const std::vector<std::string>& gpt_subset) {
  MetricsSummary summary;
  summary.gpt_subset_names = gpt_subset;

  std::map<std::string, std::vector<int>> binaries;
  std::size_t refusals = 0;
  for (const auto& record : records) {
    for (QueryRole role : kAllQueryRoles) {
      const auto count =
          record.at("ledger").value(to_string(role), std::uint64_t{0});
      summary.queries_by_role[to_string(role)] += count;
      summary.total_queries += count;
    }
    summary.failed_calls += record.at("ledger").value("failed_calls", std::uint64_t{0});
    if (record.value("failed", false)) {
      ++summary.failed_samples;
      continue;
    }
    ++summary.evaluated_samples;
    if (record.value("refusal", false)) ++refusals;
    for (const auto& [name, verdict] : record.at("verdicts").items()) {
      binaries[name].push_back(verdict.at("binary").get<int>());
    }
  }

  if (summary.evaluated_samples > 0) {
    for (const auto& [name, values] : binaries) {
      summary.per_judger_asr[name] = compute_asr(values);
    }
    summary.refusal_rate = 100.0 * static_cast<double>(refusals) /
                           static_cast<double>(summary.evaluated_samples);
    const AggregatedAsr aggregated =
        aggregate_judgers(summary.per_judger_asr, gpt_subset);
    summary.mean_asr_all = aggregated.mean_all;
    summary.mean_asr_gpt_subset = aggregated.mean_gpt_subset;
  }
  const std::size_t total_samples = summary.evaluated_samples + summary.failed_samples;
  if (total_samples > 0) {
    summary.mean_queries_per_sample =
        static_cast<double>(summary.total_queries) / static_cast<double>(total_samples);
  }
  return summary;
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FrameworkError(ErrorKind::Validation, "cannot write " + path.string());
  }
  for (const auto& line : lines) {
    out << line.dump() << '\n';
  }
}

}  // namespace

nlohmann::json summary_to_json(const MetricsSummary& summary) {
  json per_judger;
  for (const auto& [name, asr] : summary.per_judger_asr) per_judger[name] = asr;
  json queries;
  for (const auto& [role, count] : summary.queries_by_role) queries[role] = count;
  json out{{"per_judger_asr", std::move(per_judger)},
           {"mean_asr_all", summary.mean_asr_all},
           {"refusal_rate", summary.refusal_rate},
           {"evaluated_samples", summary.evaluated_samples},
           {"failed_samples", summary.failed_samples},
           {"queries_by_role", std::move(queries)},
           {"total_queries", summary.total_queries},
           {"failed_calls", summary.failed_calls},
           {"mean_queries_per_sample", summary.mean_queries_per_sample}};
  out["mean_asr_gpt_subset"] = summary.mean_asr_gpt_subset
                                   ? json(*summary.mean_asr_gpt_subset)
                                   : json(nullptr);
  out["gpt_subset"] = summary.gpt_subset_names;
  return out;
}

std::string render_summary_table(const MetricsSummary& summary) {
  std::ostringstream out;
  out << "judger ASR (%)\n";
  for (const auto& [name, asr] : summary.per_judger_asr) {
    out << "  " << name << ": " << format_percent_1dp(asr) << "\n";
  }
  out << "mean ASR (all judgers): " << format_percent_1dp(summary.mean_asr_all) << "\n";
  if (summary.mean_asr_gpt_subset) {
    out << "mean ASR (GPT subset): " << format_percent_1dp(*summary.mean_asr_gpt_subset)
        << "\n";
  }
  out << "refusal rate: " << format_percent_1dp(summary.refusal_rate) << "\n";
  out << "samples: " << summary.evaluated_samples << " evaluated, "
      << summary.failed_samples << " failed\n";
  out << "queries: " << summary.total_queries << " total";
  for (const auto& [role, count] : summary.queries_by_role) {
    out << ", " << role << "=" << count;
  }
  out << "\nfailed calls: " << summary.failed_calls << "\n";
  out << "mean queries per sample: " << summary.mean_queries_per_sample << "\n";
  return out.str();
}

RunOutput run_experiment(const ValidatedExperiment& experiment,
                         const RunOptions& options,
                         const std::filesystem::path& out_dir) {
  if (std::filesystem::exists(out_dir) && !std::filesystem::is_empty(out_dir) &&
      !options.force) {
    throw FrameworkError(ErrorKind::Validation,
                         "output directory " + out_dir.string() +
                             " is not empty (pass --force to overwrite)");
  }
  std::filesystem::create_directories(out_dir);

  ExecutionContext ctx = build_context(experiment, options);

  LoadedDataset dataset = load_dataset(experiment.dataset_config);
  std::vector<SampleRecord> selected =
      sample_records(dataset.records, experiment.spec.sampling);
  dataset.manifest.policy = experiment.spec.sampling;
  for (const auto& sample : selected) {
    dataset.manifest.selected_ids.push_back(sample.sample_id);
  }

  const json versions = versions_json(experiment);

  // Samples evaluate concurrently up to the limit; the writer below is a
  // single sink that orders by sample_id regardless of completion order.
  std::vector<SampleOutcome> outcomes(selected.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr abort_error;
  std::mutex abort_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= selected.size()) break;
      try {
        outcomes[i] = evaluate_sample(ctx, selected[i], versions);
      } catch (...) {
        std::lock_guard lock(abort_mutex);
        if (!abort_error) abort_error = std::current_exception();
        break;
      }
    }
  };

  const std::size_t thread_count = std::max(
      1, std::min<int>(options.concurrency, static_cast<int>(selected.size())));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
  for (auto& thread : threads) thread.join();
  if (abort_error) std::rethrow_exception(abort_error);

  std::vector<std::size_t> order(outcomes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return outcomes[a].record.at("sample_id").get<std::string>() <
           outcomes[b].record.at("sample_id").get<std::string>();
  });

  std::vector<json> records;
  std::vector<json> timings;
  records.reserve(outcomes.size());
  for (std::size_t i : order) {
    records.push_back(outcomes[i].record);
    timings.push_back(json{{"duration_ms", outcomes[i].duration_ms},
                           {"sample_id", outcomes[i].record.at("sample_id")}});
  }

  RunOutput output;
  output.results_path = out_dir / "results.jsonl";
  output.timing_path = out_dir / "results.timing.jsonl";
  output.manifest_path = out_dir / "manifest.json";
  output.summary_path = out_dir / "summary.json";

  write_lines(output.results_path, records);
  write_lines(output.timing_path, timings);

  json dataset_manifest{{"dataset_id", dataset.manifest.dataset_id},
                        {"format", dataset.manifest.format},
                        {"file_hash", u64_hex(dataset.manifest.file_hash)},
                        {"record_count", dataset.manifest.record_count},
                        {"dropped_count", dataset.manifest.dropped_count},
                        {"sampling",
                         json{{"mode", to_string(dataset.manifest.policy.mode)},
                              {"n", dataset.manifest.policy.n},
                              {"seed", dataset.manifest.policy.seed}}},
                        {"selected_ids", dataset.manifest.selected_ids}};

  json manifest{{"format_version", kFormatVersion},
                {"environment", environment_fingerprint()},
                {"data_dir", data_dir().string()},
                {"root_seed", experiment.spec.root_seed},
                {"concurrency", options.concurrency},
                {"dataset", std::move(dataset_manifest)},
                {"resolved", resolved_experiment_document(experiment)}};
  {
    std::ofstream out(output.manifest_path, std::ios::binary);
    out << manifest.dump(2) << '\n';
  }

  output.summary = summarize_records(records, experiment.spec.gpt_judger_names);
  {
    std::ofstream out(output.summary_path, std::ios::binary);
    out << summary_to_json(output.summary).dump(2) << '\n';
  }
  return output;
}

MetricsSummary summary_from_results_file(const std::filesystem::path& results_path,
                                         const std::vector<std::string>& gpt_subset) {
  std::ifstream in(results_path, std::ios::binary);
  if (!in) {
    throw FrameworkError(ErrorKind::Validation,
                         "cannot read results file: " + results_path.string());
  }
  std::vector<json> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::exception& ex) {
      throw FrameworkError(ErrorKind::Parse,
                           "malformed results line " + std::to_string(line_number) +
                               ": " + ex.what());
    }
  }
  return summarize_records(records, gpt_subset);
}

ReplayReport replay_run(const std::filesystem::path& manifest_path,
                        const std::filesystem::path& results_path, bool allow_live) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& ex) {
    throw FrameworkError(ErrorKind::Parse,
                         "malformed manifest: " + std::string(ex.what()));
  }
  if (manifest.value("format_version", -1) != kFormatVersion) {
    throw FrameworkError(ErrorKind::Validation,
                         "manifest format_version mismatch (expected " +
                             std::to_string(kFormatVersion) + ")");
  }
  if (manifest.contains("data_dir")) {
    set_data_dir(manifest.at("data_dir").get<std::string>());
  }

  ValidatedExperiment experiment =
      experiment_from_resolved_document(manifest.at("resolved"));

  // Replay gate: the dataset bytes must be identical to the recorded run.
  const std::string recorded_hash =
      manifest.at("dataset").at("file_hash").get<std::string>();
  const std::string current_hash =
      u64_hex(stable_hash64(read_text_file(experiment.dataset_config.path)));
  if (recorded_hash != current_hash) {
    throw FrameworkError(ErrorKind::Validation,
                         "dataset file_hash mismatch: manifest " + recorded_hash +
                             ", file " + current_hash);
  }

  RunOptions options;
  options.allow_live = allow_live;
  options.concurrency = manifest.value("concurrency", 4);
  options.force = true;

  const auto replay_dir =
      std::filesystem::temp_directory_path() /
      ("redeval-replay-" +
       u64_hex(stable_hash64(manifest_path.string() + results_path.string())));
  std::filesystem::remove_all(replay_dir);
  RunOutput rerun = run_experiment(experiment, options, replay_dir);

  std::ifstream original(results_path, std::ios::binary);
  std::ifstream fresh(rerun.results_path, std::ios::binary);
  if (!original) {
    throw FrameworkError(ErrorKind::Validation,
                         "cannot read results file: " + results_path.string());
  }

  ReplayReport report;
  std::string original_line;
  std::string fresh_line;
  while (true) {
    const bool has_original = static_cast<bool>(std::getline(original, original_line));
    const bool has_fresh = static_cast<bool>(std::getline(fresh, fresh_line));
    if (!has_original && !has_fresh) {
      report.identical = true;
      report.message = "identical";
      break;
    }
    if (has_original != has_fresh) {
      const json& present = json::parse(has_original ? original_line : fresh_line);
      report.divergence_sample_id = present.value("sample_id", "");
      report.divergence_field = "(record count)";
      report.message = "record count differs at sample " + report.divergence_sample_id;
      break;
    }
    if (original_line != fresh_line) {
      const json lhs = json::parse(original_line);
      const json rhs = json::parse(fresh_line);
      report.divergence_sample_id = lhs.value("sample_id", "");
      for (const auto& [key, value] : lhs.items()) {
        if (!rhs.contains(key) || rhs.at(key) != value) {
          report.divergence_field = key;
          break;
        }
      }
      if (report.divergence_field.empty()) {
        for (const auto& [key, value] : rhs.items()) {
          if (!lhs.contains(key)) {
            report.divergence_field = key;
            break;
          }
        }
      }
      report.message = "first divergence at sample " + report.divergence_sample_id +
                       ", field '" + report.divergence_field + "'";
      break;
    }
  }
  std::filesystem::remove_all(replay_dir);
  return report;
}

}  // namespace redeval
