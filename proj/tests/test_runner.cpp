#include <doctest.h>

#include <fstream>

#include "redeval/metrics.hpp"
#include "redeval/runner.hpp"
#include "test_util.hpp"

using namespace redeval;
using nlohmann::json;

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string make_csv(std::size_t rows) {
  std::string csv = "Goal\n";
  for (std::size_t i = 0; i < rows; ++i) {
    csv += "please explain topic " + std::to_string(i) + "\n";
  }
  return csv;
}

struct RunFixture {
  testutil::TempDir dir{"runner"};
  Registry registry = Registry::with_builtins();
  json document;

  explicit RunFixture(std::size_t rows = 3) {
    testutil::write_file(dir.path() / "d.csv", make_csv(rows));
    registry.add(ComponentKind::Dataset, "testdata",
                 json{{"format", "csv"},
                      {"path", (dir.path() / "d.csv").string()},
                      {"prompt_field", "Goal"}},
                 "test");
    document = json{{"schema_version", 1},
                    {"experiment_id", "exp-run"},
                    {"model", "builtin.mock_echo"},
                    {"attack", "builtin.no_attack"},
                    {"dataset", "testdata"},
                    {"judgers", {"builtin.rejection_prefix"}},
                    {"root_seed", 42}};
  }

  RunOutput run(const std::string& subdir, int concurrency = 1) {
    const auto validated = validate_experiment(document, registry);
    if (!validated.ok()) {
      for (const auto& issue : validated.errors) {
        MESSAGE(issue.where << ": " << issue.message);
      }
      REQUIRE(validated.ok());
    }
    RunOptions options;
    options.concurrency = concurrency;
    return run_experiment(*validated.experiment, options, dir.path() / subdir);
  }
};

std::vector<json> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(json::parse(line));
  }
  return records;
}

}  // namespace

TEST_CASE("compute_asr examples and brute-force agreement") {
  CHECK(compute_asr({1, 1, 0, 1}) == doctest::Approx(75.0));
  CHECK(compute_asr({0, 0, 0}) == doctest::Approx(0.0));
  CHECK(compute_asr({1}) == doctest::Approx(100.0));
  CHECK_THROWS_AS(compute_asr({}), FrameworkError);

  SplitMix64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t length = 1 + rng.next() % 100;
    std::vector<int> verdicts;
    std::size_t ones = 0;
    for (std::size_t i = 0; i < length; ++i) {
      const int bit = static_cast<int>(rng.next() % 2);
      verdicts.push_back(bit);
      ones += static_cast<std::size_t>(bit);
    }
    const double expected =
        100.0 * static_cast<double>(ones) / static_cast<double>(length);
    CHECK(compute_asr(verdicts) == expected);
  }
}

TEST_CASE("aggregate_judgers reproduces the reported table means") {
  // Mistral-7B-Instruct-v0.3 / harmbench row.
  const std::map<std::string, double> row = {
      {"HarmBench", 80.0}, {"GPT-HarmBench", 83.0},    {"GPT-HarmfulBinary", 73.0},
      {"GPT-HarmBenchStyle", 80.0}, {"GPT-OpenAIPolicy", 78.0}, {"GPT-TAP", 80.0},
      {"REJ-Prefix", 38.0}};
  const std::vector<std::string> gpt_subset = {"GPT-HarmBench", "GPT-HarmfulBinary",
                                               "GPT-HarmBenchStyle", "GPT-OpenAIPolicy",
                                               "GPT-TAP"};
  const auto aggregated = aggregate_judgers(row, gpt_subset);
  CHECK(round_percent_1dp(aggregated.mean_all) == doctest::Approx(73.1));
  REQUIRE(aggregated.mean_gpt_subset.has_value());
  CHECK(round_percent_1dp(*aggregated.mean_gpt_subset) == doctest::Approx(78.8));

  const std::map<std::string, double> zeros = {
      {"a", 0.0}, {"b", 0.0}, {"c", 0.0}, {"d", 0.0}, {"e", 0.0}, {"f", 0.0},
      {"g", 0.0}};
  CHECK(round_percent_1dp(aggregate_judgers(zeros, {}).mean_all) == doctest::Approx(0.0));

  CHECK_THROWS_AS(aggregate_judgers({}, {}), FrameworkError);
  CHECK_THROWS_AS(aggregate_judgers(row, {"missing"}), FrameworkError);
}

TEST_CASE("aggregation of a constant vector is the constant") {
  const std::map<std::string, double> constant = {{"a", 42.5}, {"b", 42.5}, {"c", 42.5}};
  CHECK(aggregate_judgers(constant, {}).mean_all == doctest::Approx(42.5));
}

TEST_CASE("half-up rounding to one decimal") {
  CHECK(round_percent_1dp(73.142857) == doctest::Approx(73.1));
  CHECK(round_percent_1dp(78.75) == doctest::Approx(78.8));
  CHECK(round_percent_1dp(0.05) == doctest::Approx(0.1));
  CHECK(round_percent_1dp(0.04999) == doctest::Approx(0.0));
  CHECK(format_percent_1dp(73.142857) == "73.1");
}

TEST_CASE("identity attack, no defense, echo mock: ASR 100, one query per sample") {
  RunFixture fixture(3);
  const auto output = fixture.run("out");
  CHECK(output.summary.evaluated_samples == 3);
  CHECK(output.summary.failed_samples == 0);
  CHECK(output.summary.per_judger_asr.at("builtin.rejection_prefix") ==
        doctest::Approx(100.0));
  CHECK(output.summary.refusal_rate == doctest::Approx(0.0));
  CHECK(output.summary.queries_by_role.at("target") == 3);
  CHECK(output.summary.total_queries == 3);
  CHECK(std::filesystem::exists(output.manifest_path));
  CHECK(std::filesystem::exists(output.summary_path));
  CHECK(std::filesystem::exists(output.timing_path));
}

TEST_CASE("blocklist matching every prompt: ASR 0, refusal 100, zero target calls") {
  RunFixture fixture(3);
  fixture.document["defenses"] = {
      json{{"name", "builtin.input_keyword_filter"},
           {"overrides", {{"parameters", {{"blocklist", {"topic"}}}}}}}};
  const auto output = fixture.run("out");
  CHECK(output.summary.per_judger_asr.at("builtin.rejection_prefix") ==
        doctest::Approx(0.0));
  CHECK(output.summary.refusal_rate == doctest::Approx(100.0));
  CHECK(output.summary.queries_by_role.at("target") == 0);
  CHECK(output.summary.total_queries == 0);
}

TEST_CASE("every selected sample produces exactly one line") {
  RunFixture fixture(5);
  fixture.document["sampling"] = {{"mode", "prefix_n"}, {"n", 4}};
  const auto output = fixture.run("out");
  const auto records = read_records(output.results_path);
  CHECK(records.size() == 4);
}

TEST_CASE("records are written in ascending sample_id order") {
  RunFixture fixture(6);
  const auto output = fixture.run("out", 4);
  const auto records = read_records(output.results_path);
  REQUIRE(records.size() == 6);
  for (std::size_t i = 1; i < records.size(); ++i) {
    CHECK(records[i - 1].at("sample_id").get<std::string>() <
          records[i].at("sample_id").get<std::string>());
  }
}

TEST_CASE("two runs with the same root seed are byte-identical") {
  RunFixture fixture(4);
  const auto first = fixture.run("out1");
  const auto second = fixture.run("out2");
  CHECK(read_all(first.results_path) == read_all(second.results_path));
}

TEST_CASE("concurrency limit does not change the primary output") {
  RunFixture fixture(8);
  fixture.document["defenses"] = {"builtin.smoothing_vote"};
  const auto serial = fixture.run("out1", 1);
  const auto parallel = fixture.run("out2", 8);
  CHECK(read_all(serial.results_path) == read_all(parallel.results_path));
}

TEST_CASE("ledger conservation: summary total equals the sum over records") {
  RunFixture fixture(5);
  fixture.document["defenses"] = {"builtin.smoothing_vote"};
  const auto output = fixture.run("out");
  const auto records = read_records(output.results_path);
  std::uint64_t sum = 0;
  for (const auto& record : records) {
    sum += record.at("ledger").at("total").get<std::uint64_t>();
  }
  CHECK(output.summary.total_queries == sum);
}

TEST_CASE("per-sample backend failure becomes a failure marker") {
  RunFixture fixture(3);
  // Sample 0 succeeds on attempt 0; sample 1 burns attempts 1 and 2; sample
  // 2 succeeds on attempt 3. Runs with concurrency 1 for a stable order.
  fixture.document["model"] =
      json{{"name", "builtin.mock_echo"},
           {"overrides",
            {{"parameters",
              {{"mode", "echo"},
               {"faults", {{{"kind", "rate_limit"}, {"at", {1, 2}}}}}}},
             {"retry", {{"max_attempts", 2}, {"base_delay_ms", 1}}}}}};
  const auto output = fixture.run("out");
  CHECK(output.summary.evaluated_samples == 2);
  CHECK(output.summary.failed_samples == 1);
  CHECK(output.summary.failed_calls == 2);
  // Failed samples leave the ASR denominator.
  CHECK(output.summary.per_judger_asr.at("builtin.rejection_prefix") ==
        doctest::Approx(100.0));

  const auto records = read_records(output.results_path);
  REQUIRE(records.size() == 3);
  CHECK(records[1].value("failed", false));
  CHECK(records[1].at("error").at("kind") == "rate_limit");
}

TEST_CASE("report recomputation agrees with the run summary") {
  RunFixture fixture(4);
  // The echo mock would parrot the rendered judge prompt, which is not a
  // yes/no answer; register a judge model with a parseable reply.
  fixture.registry.add(
      ComponentKind::Model, "yes_judge",
      json{{"kind", "mock"},
           {"parameters", {{"mode", "script"}, {"default_reply", "yes"}}}},
      "test");
  fixture.document["judgers"] = {
      "builtin.rejection_prefix",
      json{{"name", "builtin.gpt_harmbench"},
           {"overrides", {{"judge_model", "yes_judge"}}}}};
  fixture.document["gpt_judgers"] = {"builtin.gpt_harmbench"};
  const auto output = fixture.run("out");
  const auto recomputed = summary_from_results_file(
      output.results_path, {"builtin.gpt_harmbench"});
  CHECK(summary_to_json(recomputed).dump() == summary_to_json(output.summary).dump());
}

TEST_CASE("replay of a mock-only run reports identical") {
  RunFixture fixture(4);
  const auto output = fixture.run("out");
  const auto report = replay_run(output.manifest_path, output.results_path, false);
  CHECK(report.identical);
  CHECK(report.message == "identical");
}

TEST_CASE("replay rejects an edited dataset file via the hash gate") {
  RunFixture fixture(4);
  const auto output = fixture.run("out");
  testutil::write_file(fixture.dir.path() / "d.csv", make_csv(4) + "extra row\n");
  CHECK_THROWS_WITH_AS(replay_run(output.manifest_path, output.results_path, false),
                       doctest::Contains("file_hash"), FrameworkError);
}

TEST_CASE("replay pinpoints the first divergent sample and field") {
  RunFixture fixture(3);
  fixture.document["model"] =
      json{{"name", "builtin.mock_echo"},
           {"overrides",
            {{"parameters",
              {{"mode", "script"},
               {"script",
                {{"please explain topic 0", "reply zero"},
                 {"please explain topic 1", "reply one"},
                 {"please explain topic 2", "reply two"}}}}}}}};
  const auto output = fixture.run("out");

  // Edit one scripted reply in the recorded results, as if the backend had
  // answered differently.
  auto records = read_records(output.results_path);
  records[1]["final_response"] = "tampered";
  std::ofstream out(output.results_path, std::ios::binary);
  for (const auto& record : records) out << record.dump() << '\n';
  out.close();

  const auto report = replay_run(output.manifest_path, output.results_path, false);
  CHECK_FALSE(report.identical);
  CHECK(report.divergence_sample_id == "testdata:000001");
  CHECK(report.divergence_field == "final_response");
}

TEST_CASE("the canonical refusal text is configurable per experiment") {
  RunFixture fixture(2);
  fixture.document["defenses"] = {
      json{{"name", "builtin.input_keyword_filter"},
           {"overrides", {{"parameters", {{"blocklist", {"topic"}}}}}}}};
  fixture.document["refusal_text"] = "Request declined by policy.";
  const auto output = fixture.run("out");
  const auto records = read_records(output.results_path);
  REQUIRE(records.size() == 2);
  for (const auto& record : records) {
    CHECK(record.at("final_response") == "Request declined by policy.");
    CHECK(record.at("refused_by_defense") == true);
    CHECK(record.at("refusal") == true);
  }
}

TEST_CASE("live endpoints are refused without allow_live") {
  RunFixture fixture(2);
  fixture.registry.add(ComponentKind::Model, "live_model",
                       json{{"kind", "openai_compatible"},
                            {"base_url", "http://127.0.0.1:9/v1"},
                            {"model_id", "m"}},
                       "test");
  fixture.document["model"] = "live_model";
  const auto validated = validate_experiment(fixture.document, fixture.registry);
  REQUIRE(validated.ok());
  RunOptions options;
  options.allow_live = false;
  CHECK_THROWS_WITH_AS(
      run_experiment(*validated.experiment, options, fixture.dir.path() / "out"),
      doctest::Contains("--allow-live"), FrameworkError);
}

TEST_CASE("non-empty output directory requires force") {
  RunFixture fixture(2);
  fixture.run("out");
  CHECK_THROWS_WITH_AS(fixture.run("out"), doctest::Contains("--force"),
                       FrameworkError);
  const auto validated = validate_experiment(fixture.document, fixture.registry);
  REQUIRE(validated.ok());
  RunOptions options;
  options.force = true;
  run_experiment(*validated.experiment, options, fixture.dir.path() / "out");
}

TEST_CASE("primary record keys are alphabetical and free of timestamps") {
  RunFixture fixture(1);
  const auto output = fixture.run("out");
  const std::string content = read_all(output.results_path);
  const auto records = read_records(output.results_path);
  REQUIRE(records.size() == 1);
  std::string previous;
  for (const auto& [key, value] : records[0].items()) {
    CHECK(previous < key);
    previous = key;
  }
  CHECK(content.find("duration") == std::string::npos);
  CHECK(content.find("timestamp") == std::string::npos);
  // Wall-clock data lives in the sidecar.
  CHECK(read_all(output.timing_path).find("duration_ms") != std::string::npos);
}
