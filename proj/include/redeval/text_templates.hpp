#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace redeval {

inline constexpr std::string_view kPayloadPlaceholder = "{{PAYLOAD}}";

// Replaces every occurrence of each placeholder. Placeholders that do not
// occur are ignored.
std::string substitute_placeholders(
    std::string_view text,
    const std::vector<std::pair<std::string_view, std::string_view>>& bindings);

std::size_t count_occurrences(std::string_view text, std::string_view needle);

// Directory of UTF-8 template files ("<id>.txt"); attacks, defenses and
// judgers all load their prompt texts here so the prose stays auditable and
// swappable without code changes.
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path dir);

  bool contains(const std::string& template_id) const;

  // Raw template text; Validation error if the id is unknown.
  const std::string& raw(const std::string& template_id) const;

  // Substitutes the payload placeholder, which must occur exactly once.
  std::string render_payload(const std::string& template_id,
                             std::string_view payload) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::string> cache_;
};

}  // namespace redeval
