#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "redeval/metrics.hpp"
#include "redeval/validate.hpp"

namespace redeval {

struct RunOptions {
  int concurrency = 4;
  bool allow_live = false;  // non-mock backends refuse to run without it
  bool force = false;       // allow writing into a non-empty output directory
};

struct RunOutput {
  std::filesystem::path results_path;
  std::filesystem::path manifest_path;
  std::filesystem::path summary_path;
  std::filesystem::path timing_path;
  MetricsSummary summary;
};

// Executes the experiment over the sampled dataset and writes:
//   results.jsonl        one record per selected sample, ascending sample_id,
//                        alphabetical keys, replay-comparable byte for byte
//   results.timing.jsonl wall-clock sidecar, excluded from comparisons
//   manifest.json        resolved config, dataset manifest, fingerprints
//   summary.json         metrics summary
RunOutput run_experiment(const ValidatedExperiment& experiment,
                         const RunOptions& options,
                         const std::filesystem::path& out_dir);

// Recomputes the metrics summary from a results file alone (the report
// subcommand); gpt_subset may be empty.
MetricsSummary summary_from_results_file(const std::filesystem::path& results_path,
                                         const std::vector<std::string>& gpt_subset);

nlohmann::json summary_to_json(const MetricsSummary& summary);
std::string render_summary_table(const MetricsSummary& summary);

struct ReplayReport {
  bool identical = false;
  std::string message;
  std::string divergence_sample_id;
  std::string divergence_field;
};

// Re-executes the manifest's resolved experiment and diffs the canonical
// records against the original results file.
ReplayReport replay_run(const std::filesystem::path& manifest_path,
                        const std::filesystem::path& results_path, bool allow_live);

}  // namespace redeval
