#include "redeval/data_dir.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "redeval/errors.hpp"

#ifndef REDEVAL_DEFAULT_DATA_DIR
#define REDEVAL_DEFAULT_DATA_DIR "data"
#endif

namespace redeval {

namespace {
std::mutex g_mutex;
std::filesystem::path g_override;
}  // namespace

std::filesystem::path data_dir() {
  {
    std::lock_guard lock(g_mutex);
    if (!g_override.empty()) return g_override;
  }
  if (const char* env = std::getenv("REDEVAL_DATA_DIR"); env && *env) {
    return env;
  }
  return REDEVAL_DEFAULT_DATA_DIR;
}

void set_data_dir(const std::filesystem::path& dir) {
  std::lock_guard lock(g_mutex);
  g_override = dir;
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path,
                                        const std::filesystem::path& base) {
  if (path.is_absolute()) return path;
  if (!base.empty()) {
    auto local = base / path;
    if (std::filesystem::exists(local)) return local;
  }
  return data_dir() / path;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FrameworkError(ErrorKind::Validation,
                         "cannot read file: " + path.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace redeval
