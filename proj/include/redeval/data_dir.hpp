#pragma once

#include <filesystem>

namespace redeval {

// Root of the shipped data files (templates, refusal cues, blocklists).
// Resolution order: explicit set_data_dir(), REDEVAL_DATA_DIR env var,
// compiled-in default (the repository's data/ directory).
std::filesystem::path data_dir();
void set_data_dir(const std::filesystem::path& dir);

// Resolves a possibly-relative data file path against a base directory
// (a component's origin directory) and then the data dir.
std::filesystem::path resolve_data_path(const std::filesystem::path& path,
                                        const std::filesystem::path& base);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace redeval
