#include "redeval/dataset.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "redeval/data_dir.hpp"
#include "redeval/errors.hpp"
#include "redeval/hash.hpp"
#include "redeval/unicode.hpp"

namespace redeval {

namespace {

std::string zero_padded(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return digits;
}

void trim_trailing_cr(std::string& text) {
  while (!text.empty() && text.back() == '\r') text.pop_back();
}

bool category_selected(const DatasetConfig& config,
                       const std::optional<std::string>& category) {
  if (!config.category_allow.empty()) {
    if (!category) return false;
    if (std::find(config.category_allow.begin(), config.category_allow.end(),
                  *category) == config.category_allow.end()) {
      return false;
    }
  }
  if (!config.category_deny.empty() && category) {
    if (std::find(config.category_deny.begin(), config.category_deny.end(),
                  *category) != config.category_deny.end()) {
      return false;
    }
  }
  return true;
}

// Raw row text plus its source index (0-based over data rows).
struct RawRow {
  std::size_t index;
  std::string prompt;
  std::optional<std::string> category;
};

std::vector<RawRow> rows_from_csv(const DatasetConfig& config,
                                  const std::string& content) {
  const auto table = parse_csv(content);
  if (table.empty()) {
    throw FrameworkError(ErrorKind::Validation,
                         "CSV file has no header row: " + config.path);
  }
  const auto& header = table.front();
  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto prompt_col = column_of(config.prompt_field);
  if (!prompt_col) {
    throw FrameworkError(ErrorKind::Validation,
                         "missing column '" + config.prompt_field + "' in " +
                             config.path);
  }
  const auto category_col =
      config.category_field.empty() ? std::nullopt : column_of(config.category_field);

  std::vector<RawRow> rows;
  rows.reserve(table.size() - 1);
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    RawRow raw;
    raw.index = r - 1;
    raw.prompt = *prompt_col < row.size() ? row[*prompt_col] : "";
    if (category_col && *category_col < row.size() && !row[*category_col].empty()) {
      raw.category = row[*category_col];
    }
    rows.push_back(std::move(raw));
  }
  return rows;
}

std::vector<RawRow> rows_from_jsonl(const DatasetConfig& config,
                                    const std::string& content) {
  std::vector<RawRow> rows;
  std::istringstream in(content);
  std::string line;
  std::size_t line_number = 0;
  std::size_t object_index = 0;
  while (std::getline(in, line)) {
    ++line_number;
    trim_trailing_cr(line);
    if (line.empty()) continue;
    nlohmann::json object;
    try {
      object = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw FrameworkError(ErrorKind::Parse,
                           "malformed JSONL row " + std::to_string(line_number) +
                               " in " + config.path + ": " + ex.what());
    }
    RawRow raw;
    raw.index = object_index++;
    if (object.contains(config.prompt_field) &&
        object.at(config.prompt_field).is_string()) {
      raw.prompt = object.at(config.prompt_field).get<std::string>();
    }
    if (!config.category_field.empty() && object.contains(config.category_field) &&
        object.at(config.category_field).is_string()) {
      raw.category = object.at(config.category_field).get<std::string>();
    }
    rows.push_back(std::move(raw));
  }
  return rows;
}

}  // namespace

void apply_dataset_preset(DatasetConfig& config, std::string_view preset) {
  if (preset == "harmbench") {
    config.format = "csv";
    if (config.prompt_field.empty()) config.prompt_field = "Behavior";
    if (config.category_field.empty()) config.category_field = "SemanticCategory";
  } else if (preset == "jbb") {
    config.format = "csv";
    if (config.prompt_field.empty()) config.prompt_field = "Goal";
    if (config.category_field.empty()) config.category_field = "Category";
  } else if (preset == "airbench") {
    config.format = "csv";
    if (config.prompt_field.empty()) config.prompt_field = "prompt";
    if (config.category_field.empty()) config.category_field = "l4-name";
  } else {
    throw FrameworkError(ErrorKind::Validation,
                         "unknown dataset preset: " + std::string(preset));
  }
}

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };

  std::size_t i = 0;
  const std::size_t n = content.size();
  while (i < n) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field.push_back(c);
        ++i;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
      ++i;
    } else if (c == ',') {
      end_field();
      ++i;
    } else if (c == '\r' && i + 1 < n && content[i + 1] == '\n') {
      end_row();
      i += 2;
    } else if (c == '\n' || c == '\r') {
      end_row();
      ++i;
    } else {
      field.push_back(c);
      field_started = true;
      ++i;
    }
  }
  if (quoted) {
    throw FrameworkError(ErrorKind::Parse, "unterminated quoted CSV field");
  }
  if (field_started || !field.empty() || !row.empty()) {
    end_row();
  }
  return rows;
}

LoadedDataset load_dataset(const DatasetConfig& config) {
  if (config.id.empty()) {
    throw FrameworkError(ErrorKind::Validation, "dataset id must be non-empty");
  }
  if (config.prompt_field.empty()) {
    throw FrameworkError(ErrorKind::Validation,
                         "dataset '" + config.id + "' has no prompt field configured");
  }
  if (!std::filesystem::exists(config.path)) {
    throw FrameworkError(ErrorKind::Validation,
                         "dataset file not found: " + config.path);
  }
  const std::string content = read_text_file(config.path);

  LoadedDataset loaded;
  loaded.manifest.dataset_id = config.id;
  loaded.manifest.format = config.format;
  loaded.manifest.file_hash = stable_hash64(content);

  std::vector<RawRow> rows;
  if (config.format == "csv") {
    rows = rows_from_csv(config, content);
  } else if (config.format == "jsonl") {
    rows = rows_from_jsonl(config, content);
  } else {
    throw FrameworkError(ErrorKind::Validation,
                         "unknown dataset format: " + config.format);
  }

  for (auto& raw : rows) {
    trim_trailing_cr(raw.prompt);
    if (raw.prompt.empty()) {
      ++loaded.manifest.dropped_count;
      continue;
    }
    if (!is_valid_utf8(raw.prompt)) {
      throw FrameworkError(ErrorKind::Parse,
                           "row " + std::to_string(raw.index) + " of " + config.id +
                               " is not valid UTF-8");
    }
    if (!category_selected(config, raw.category)) {
      ++loaded.manifest.dropped_count;
      continue;
    }
    SampleRecord record;
    record.sample_id = config.id + ":" + zero_padded(raw.index);
    record.prompt = std::move(raw.prompt);
    record.category = std::move(raw.category);
    record.source_name = config.id;
    record.source_path = config.path;
    record.content_hash = stable_hash64(record.prompt);
    loaded.records.push_back(std::move(record));
  }
  loaded.manifest.record_count = loaded.records.size();
  return loaded;
}

std::vector<SampleRecord> sample_records(const std::vector<SampleRecord>& records,
                                         const SamplingPolicy& policy) {
  switch (policy.mode) {
    case SamplingPolicy::Mode::All:
      return records;
    case SamplingPolicy::Mode::PrefixN: {
      if (policy.n > records.size()) {
        throw FrameworkError(ErrorKind::Validation,
                             "prefix_n = " + std::to_string(policy.n) +
                                 " exceeds dataset size " +
                                 std::to_string(records.size()));
      }
      return {records.begin(), records.begin() + static_cast<long>(policy.n)};
    }
    case SamplingPolicy::Mode::SeededRandom: {
      if (policy.n > records.size()) {
        throw FrameworkError(ErrorKind::Validation,
                             "seeded_random n = " + std::to_string(policy.n) +
                                 " exceeds dataset size " +
                                 std::to_string(records.size()));
      }
      // Pinned Fisher-Yates direction and index formula so shuffles are
      // identical across languages; modulo bias is accepted and negligible
      // at dataset scales.
      std::vector<SampleRecord> shuffled = records;
      SplitMix64 rng(policy.seed);
      for (std::size_t i = shuffled.size(); i-- > 1;) {
        const std::size_t j = static_cast<std::size_t>(rng.next() % (i + 1));
        std::swap(shuffled[i], shuffled[j]);
      }
      shuffled.resize(policy.n);
      return shuffled;
    }
  }
  throw FrameworkError(ErrorKind::Validation, "unknown sampling mode");
}

}  // namespace redeval
