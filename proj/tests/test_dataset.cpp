#include <doctest.h>

#include <algorithm>

#include "redeval/dataset.hpp"
#include "test_util.hpp"

using namespace redeval;

namespace {

DatasetConfig csv_config(const std::filesystem::path& path,
                         const std::string& prompt_field = "Goal") {
  DatasetConfig config;
  config.id = "ds";
  config.format = "csv";
  config.path = path.string();
  config.prompt_field = prompt_field;
  return config;
}

std::vector<SampleRecord> numbered_records(std::size_t count) {
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < count; ++i) {
    SampleRecord record;
    record.sample_id = "ds:" + std::to_string(i);
    record.prompt = "prompt " + std::to_string(i);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace

TEST_CASE("parse_csv handles RFC 4180 quoting") {
  const auto rows = parse_csv("a,b,c\r\n\"x,y\",\"he said \"\"hi\"\"\",\"line\nbreak\"\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b", "c"});
  CHECK(rows[1][0] == "x,y");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(rows[1][2] == "line\nbreak");
}

TEST_CASE("parse_csv: no trailing phantom row, unterminated quote is an error") {
  CHECK(parse_csv("a,b\n").size() == 1);
  CHECK(parse_csv("").empty());
  CHECK_THROWS_AS(parse_csv("\"unterminated"), FrameworkError);
}

TEST_CASE("load assigns zero-padded source-row sample ids") {
  testutil::TempDir dir("csv");
  testutil::write_file(dir.path() / "d.csv", "Goal\ng1\ng2\n");
  auto config = csv_config(dir.path() / "d.csv");
  config.id = "jbb";
  const auto loaded = load_dataset(config);
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].sample_id == "jbb:000000");
  CHECK(loaded.records[1].sample_id == "jbb:000001");
  CHECK(loaded.records[0].prompt == "g1");
  CHECK(loaded.records[0].content_hash == stable_hash64("g1"));
  CHECK(loaded.manifest.record_count == 2);
  CHECK(loaded.manifest.dropped_count == 0);
}

TEST_CASE("loading the same file twice gives identical hashes and ids") {
  testutil::TempDir dir("csv");
  testutil::write_file(dir.path() / "d.csv", "Goal\nalpha\nbeta\ngamma\n");
  const auto config = csv_config(dir.path() / "d.csv");
  const auto first = load_dataset(config);
  const auto second = load_dataset(config);
  CHECK(first.manifest.file_hash == second.manifest.file_hash);
  REQUIRE(first.records.size() == second.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    CHECK(first.records[i].sample_id == second.records[i].sample_id);
  }
}

TEST_CASE("rows with empty prompts are dropped and counted") {
  testutil::TempDir dir("csv");
  testutil::write_file(dir.path() / "d.csv", "Goal\na\n\nb\n\"\"\nc\n");
  const auto loaded = load_dataset(csv_config(dir.path() / "d.csv"));
  CHECK(loaded.records.size() == 3);
  CHECK(loaded.manifest.dropped_count == 2);
  // Source row indices survive the drops.
  CHECK(loaded.records[0].sample_id == "ds:000000");
  CHECK(loaded.records[1].sample_id == "ds:000002");
  CHECK(loaded.records[2].sample_id == "ds:000004");
}

TEST_CASE("prompts keep their bytes apart from trailing CR trimming") {
  testutil::TempDir dir("csv");
  testutil::write_file(dir.path() / "d.csv", "Goal\n\"  Spaced  Prompt \"\n");
  const auto loaded = load_dataset(csv_config(dir.path() / "d.csv"));
  REQUIRE(loaded.records.size() == 1);
  CHECK(loaded.records[0].prompt == "  Spaced  Prompt ");
}

TEST_CASE("missing file and missing column are validation errors") {
  testutil::TempDir dir("csv");
  CHECK_THROWS_AS(load_dataset(csv_config(dir.path() / "nope.csv")), FrameworkError);
  testutil::write_file(dir.path() / "d.csv", "Other\nx\n");
  CHECK_THROWS_AS(load_dataset(csv_config(dir.path() / "d.csv", "Goal")),
                  FrameworkError);
}

TEST_CASE("jsonl loading with malformed row reporting") {
  testutil::TempDir dir("jsonl");
  testutil::write_file(dir.path() / "d.jsonl",
                       "{\"prompt\": \"p0\", \"extra\": 1}\n"
                       "{\"prompt\": \"p1\"}\n");
  DatasetConfig config;
  config.id = "air";
  config.format = "jsonl";
  config.path = (dir.path() / "d.jsonl").string();
  config.prompt_field = "prompt";
  const auto loaded = load_dataset(config);
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].prompt == "p0");
  CHECK(loaded.records[1].sample_id == "air:000001");

  testutil::write_file(dir.path() / "bad.jsonl", "{\"prompt\": \"ok\"}\nnot json\n");
  config.path = (dir.path() / "bad.jsonl").string();
  try {
    load_dataset(config);
    FAIL("expected Parse error");
  } catch (const FrameworkError& err) {
    CHECK(err.kind() == ErrorKind::Parse);
    CHECK(std::string(err.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("category allow/deny filtering is opt-in") {
  testutil::TempDir dir("csv");
  testutil::write_file(dir.path() / "d.csv",
                       "Goal,Category\na,cat1\nb,cat2\nc,cat1\n");
  auto config = csv_config(dir.path() / "d.csv");
  config.category_field = "Category";
  CHECK(load_dataset(config).records.size() == 3);

  config.category_allow = {"cat1"};
  const auto allowed = load_dataset(config);
  CHECK(allowed.records.size() == 2);
  CHECK(allowed.manifest.dropped_count == 1);

  config.category_allow.clear();
  config.category_deny = {"cat1"};
  CHECK(load_dataset(config).records.size() == 1);
}

TEST_CASE("dataset presets select the canonical fields") {
  DatasetConfig jbb;
  apply_dataset_preset(jbb, "jbb");
  CHECK(jbb.prompt_field == "Goal");
  DatasetConfig harmbench;
  apply_dataset_preset(harmbench, "harmbench");
  CHECK(harmbench.prompt_field == "Behavior");
  DatasetConfig airbench;
  apply_dataset_preset(airbench, "airbench");
  CHECK(airbench.prompt_field == "prompt");
  DatasetConfig bad;
  CHECK_THROWS_AS(apply_dataset_preset(bad, "unknown"), FrameworkError);
}

TEST_CASE("prefix_n takes the source-order prefix") {
  const auto records = numbered_records(4);
  SamplingPolicy policy;
  policy.mode = SamplingPolicy::Mode::PrefixN;
  policy.n = 3;
  const auto selected = sample_records(records, policy);
  REQUIRE(selected.size() == 3);
  CHECK(selected[0].sample_id == "ds:0");
  CHECK(selected[2].sample_id == "ds:2");
}

TEST_CASE("sampling validation: n larger than the dataset") {
  SamplingPolicy policy;
  policy.mode = SamplingPolicy::Mode::PrefixN;
  policy.n = 5;
  CHECK_THROWS_AS(sample_records(numbered_records(4), policy), FrameworkError);
  policy.mode = SamplingPolicy::Mode::SeededRandom;
  CHECK_THROWS_AS(sample_records(numbered_records(4), policy), FrameworkError);
}

TEST_CASE("seeded_random with n = size is a permutation (multiset oracle)") {
  const auto records = numbered_records(100);
  SamplingPolicy policy;
  policy.mode = SamplingPolicy::Mode::SeededRandom;
  policy.n = 100;
  policy.seed = 7;
  const auto selected = sample_records(records, policy);
  REQUIRE(selected.size() == records.size());

  std::vector<std::string> expected, actual;
  for (const auto& r : records) expected.push_back(r.sample_id);
  for (const auto& r : selected) actual.push_back(r.sample_id);
  std::sort(expected.begin(), expected.end());
  std::sort(actual.begin(), actual.end());
  CHECK(expected == actual);

  // And it is not the identity permutation for this seed.
  bool moved = false;
  const auto again = sample_records(records, policy);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    CHECK(selected[i].sample_id == again[i].sample_id);
    moved |= selected[i].sample_id != records[i].sample_id;
  }
  CHECK(moved);
}

TEST_CASE("seeded_random selection depends only on order, seed and n") {
  const auto records = numbered_records(50);
  SamplingPolicy policy;
  policy.mode = SamplingPolicy::Mode::SeededRandom;
  policy.n = 10;
  policy.seed = 123;
  const auto a = sample_records(records, policy);
  const auto b = sample_records(records, policy);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sample_id == b[i].sample_id);
  }
  policy.seed = 124;
  const auto c = sample_records(records, policy);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    differs |= a[i].sample_id != c[i].sample_id;
  }
  CHECK(differs);
}

TEST_CASE("pinned Fisher-Yates order for cross-language reproducibility") {
  // Frozen expectation computed by hand-running the pinned algorithm
  // (i from size-1 down to 1, j = next() % (i+1)) over ids [0..4], seed 42.
  std::vector<std::string> ids = {"0", "1", "2", "3", "4"};
  SplitMix64 rng(42);
  auto reference = ids;
  for (std::size_t i = reference.size(); i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng.next() % (i + 1));
    std::swap(reference[i], reference[j]);
  }

  auto records = numbered_records(5);
  for (std::size_t i = 0; i < 5; ++i) records[i].sample_id = ids[i];
  SamplingPolicy policy;
  policy.mode = SamplingPolicy::Mode::SeededRandom;
  policy.n = 5;
  policy.seed = 42;
  const auto selected = sample_records(records, policy);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(selected[i].sample_id == reference[i]);
  }
}
