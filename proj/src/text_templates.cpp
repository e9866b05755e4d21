#include "redeval/text_templates.hpp"

#include "redeval/data_dir.hpp"
#include "redeval/errors.hpp"

namespace redeval {

std::string substitute_placeholders(
    std::string_view text,
    const std::vector<std::pair<std::string_view, std::string_view>>& bindings) {
  std::string out(text);
  for (const auto& [placeholder, value] : bindings) {
    std::size_t pos = 0;
    while ((pos = out.find(placeholder, pos)) != std::string::npos) {
      out.replace(pos, placeholder.size(), value);
      pos += value.size();
    }
  }
  return out;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

TemplateStore::TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

bool TemplateStore::contains(const std::string& template_id) const {
  std::lock_guard lock(mutex_);
  if (cache_.count(template_id)) return true;
  return std::filesystem::exists(dir_ / (template_id + ".txt"));
}

const std::string& TemplateStore::raw(const std::string& template_id) const {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(template_id);
  if (it != cache_.end()) return it->second;
  const auto path = dir_ / (template_id + ".txt");
  if (!std::filesystem::exists(path)) {
    throw FrameworkError(ErrorKind::Validation,
                         "unknown template '" + template_id + "' (looked in " +
                             dir_.string() + ")");
  }
  auto [inserted, _] = cache_.emplace(template_id, read_text_file(path));
  return inserted->second;
}

std::string TemplateStore::render_payload(const std::string& template_id,
                                          std::string_view payload) const {
  const std::string& text = raw(template_id);
  const std::size_t occurrences = count_occurrences(text, kPayloadPlaceholder);
  if (occurrences != 1) {
    throw FrameworkError(ErrorKind::Validation,
                         "template '" + template_id + "' must contain exactly one " +
                             std::string(kPayloadPlaceholder) + " placeholder, found " +
                             std::to_string(occurrences));
  }
  return substitute_placeholders(text, {{kPayloadPlaceholder, payload}});
}

}  // namespace redeval
