#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace redeval {

// Dotted technique label attached to attacks and defenses for coverage
// analysis. Attack and defense taxonomies are separate namespaces: the same
// code can carry different titles in each.
struct TaxonomyTag {
  std::string code;
  std::string title;

  bool operator==(const TaxonomyTag&) const = default;
};

enum class TagDomain { Attack, Defense };

// True iff code matches digit+(.digit+)*.
bool valid_tag_code(std::string_view code);

const std::vector<TaxonomyTag>& taxonomy_table(TagDomain domain);

std::optional<TaxonomyTag> find_tag(TagDomain domain, std::string_view code);

// Resolves a code against the built-in registry; unknown codes are a
// Validation error rather than silently accepted.
TaxonomyTag require_tag(TagDomain domain, std::string_view code);

}  // namespace redeval
