#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "redeval/data_dir.hpp"
#include "redeval/runner.hpp"
#include "redeval/validate.hpp"
#include "redeval/version.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

json load_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(redeval::read_text_file(path));
  } catch (const json::exception& ex) {
    throw redeval::FrameworkError(redeval::ErrorKind::Parse,
                                  path.string() + ": " + ex.what());
  }
}

void print_validation_errors(const std::vector<redeval::ValidationIssue>& errors) {
  for (const auto& issue : errors) {
    std::cerr << "error [" << issue.where << "]: " << issue.message << "\n";
  }
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::string& components_dir, const redeval::RunOptions& options) {
  const redeval::Registry registry = redeval::discover(components_dir);
  const redeval::ValidationResult validated =
      redeval::validate_experiment(load_json_file(config_path), registry);
  if (!validated.ok()) {
    print_validation_errors(validated.errors);
    return kExitValidation;
  }
  const redeval::RunOutput output =
      redeval::run_experiment(*validated.experiment, options, out_dir);
  std::cout << render_summary_table(output.summary);
  std::cout << "results:  " << output.results_path.string() << "\n"
            << "manifest: " << output.manifest_path.string() << "\n"
            << "summary:  " << output.summary_path.string() << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& config_path, const std::string& components_dir) {
  const redeval::Registry registry = redeval::discover(components_dir);
  const redeval::ValidationResult validated =
      redeval::validate_experiment(load_json_file(config_path), registry);
  if (!validated.ok()) {
    print_validation_errors(validated.errors);
    return kExitValidation;
  }
  std::cout << "OK\n";
  return kExitOk;
}

int cmd_replay(const std::string& manifest_path, const std::string& results_path,
               bool allow_live) {
  const redeval::ReplayReport report =
      redeval::replay_run(manifest_path, results_path, allow_live);
  std::cout << report.message << "\n";
  return kExitOk;
}

int cmd_report(const std::string& results_path) {
  // The designated GPT subset comes from the manifest sitting next to the
  // results file when one exists.
  std::vector<std::string> gpt_subset;
  const auto manifest_path =
      std::filesystem::path(results_path).parent_path() / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    const json manifest = load_json_file(manifest_path);
    if (manifest.contains("resolved") &&
        manifest.at("resolved").contains("gpt_judgers")) {
      for (const auto& name : manifest.at("resolved").at("gpt_judgers")) {
        gpt_subset.push_back(name.get<std::string>());
      }
    }
  }
  const redeval::MetricsSummary summary =
      redeval::summary_from_results_file(results_path, gpt_subset);
  std::cout << render_summary_table(summary);
  return kExitOk;
}

int cmd_list(const std::string& components_dir, const std::string& kind_filter) {
  const redeval::Registry registry = redeval::discover(components_dir);
  for (const redeval::RegistryEntry* entry : registry.entries()) {
    const std::string kind = redeval::to_string(entry->kind);
    if (!kind_filter.empty() && kind != kind_filter) continue;
    std::cout << kind << "  " << entry->name;
    if (entry->document.contains("tags")) {
      std::cout << "  [";
      bool first = true;
      for (const auto& tag : entry->document.at("tags")) {
        if (!first) std::cout << ", ";
        first = false;
        std::cout << tag.get<std::string>();
      }
      std::cout << "]";
    }
    std::cout << "  (" << entry->origin << ")\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"redeval — configuration-driven evaluation of LLM jailbreak "
               "attacks and defenses"};
  app.set_version_flag("--version", redeval::kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string data_override;
  app.add_option("--data", data_override, "override the data directory");
  std::string components_dir;
  app.add_option("--components", components_dir,
                 "directory of component configs (models/, attacks/, ...)");

  std::string config_path, out_dir, manifest_path, results_path, kind_filter;
  redeval::RunOptions run_options;

  CLI::App* run = app.add_subcommand("run", "execute an experiment");
  run->add_option("--config", config_path, "experiment document")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--concurrency", run_options.concurrency,
                  "max samples evaluated in parallel");
  run->add_flag("--allow-live", run_options.allow_live,
                "permit non-mock (live) backends");
  run->add_flag("--force", run_options.force, "overwrite a non-empty output dir");

  CLI::App* validate = app.add_subcommand("validate", "validate an experiment document");
  validate->add_option("--config", config_path, "experiment document")->required();

  CLI::App* replay = app.add_subcommand("replay", "re-execute a run and diff records");
  replay->add_option("--manifest", manifest_path, "manifest.json of the run")->required();
  replay->add_option("--results", results_path, "results.jsonl of the run")->required();
  replay->add_flag("--allow-live", run_options.allow_live,
                   "permit non-mock (live) backends");

  CLI::App* report = app.add_subcommand("report", "recompute metrics from results");
  report->add_option("--results", results_path, "results.jsonl")->required();

  CLI::App* list = app.add_subcommand("list", "print registry contents");
  list->add_option("--kind", kind_filter, "model|attack|defense|dataset|judger");

  CLI11_PARSE(app, argc, argv);

  if (!data_override.empty()) redeval::set_data_dir(data_override);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, components_dir, run_options);
    if (validate->parsed()) return cmd_validate(config_path, components_dir);
    if (replay->parsed()) {
      return cmd_replay(manifest_path, results_path, run_options.allow_live);
    }
    if (report->parsed()) return cmd_report(results_path);
    if (list->parsed()) return cmd_list(components_dir, kind_filter);
  } catch (const redeval::FrameworkError& err) {
    std::cerr << "error (" << to_string(err.kind()) << "): " << err.what() << "\n";
    return err.kind() == redeval::ErrorKind::Validation ? kExitValidation
                                                        : kExitRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
