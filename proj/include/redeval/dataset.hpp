#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "redeval/types.hpp"

namespace redeval {

struct SampleRecord {
  std::string sample_id;  // "<dataset_id>:<zero-padded source row index>"
  std::string prompt;     // non-empty after normalization
  std::optional<std::string> category;
  std::string source_name;
  std::string source_path;
  std::uint64_t content_hash = 0;  // stable_hash64 of the prompt bytes
};

struct DatasetManifest {
  std::string dataset_id;
  std::string format;
  std::uint64_t file_hash = 0;  // stable_hash64 of the raw file bytes
  std::size_t record_count = 0;
  std::size_t dropped_count = 0;
  SamplingPolicy policy;
  std::vector<std::string> selected_ids;
};

struct DatasetConfig {
  std::string id;
  std::string format = "csv";  // "csv" | "jsonl"
  std::string path;
  std::string prompt_field;
  std::string category_field;
  std::vector<std::string> category_allow;  // opt-in filtering, default off
  std::vector<std::string> category_deny;
};

// Fills prompt/category field names for the built-in corpora: "harmbench"
// (canonical CSV, behavior text), "jbb" (column Goal), "airbench" (field
// prompt).
void apply_dataset_preset(DatasetConfig& config, std::string_view preset);

struct LoadedDataset {
  std::vector<SampleRecord> records;
  DatasetManifest manifest;
};

// Normalization is UTF-8 validation plus trailing-CR trimming only; prompts
// reach models verbatim. Rows with empty prompts are dropped and counted.
LoadedDataset load_dataset(const DatasetConfig& config);

// prefix_n takes the first n in source order; seeded_random runs a
// Fisher-Yates shuffle driven by SplitMix64 (i from size-1 down to 1,
// j = next % (i+1)) and takes the first n. Pure function of (records, policy).
std::vector<SampleRecord> sample_records(const std::vector<SampleRecord>& records,
                                         const SamplingPolicy& policy);

// RFC 4180: quoted fields, doubled quotes, CRLF and embedded newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

}  // namespace redeval
