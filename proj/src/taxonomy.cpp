#include "redeval/taxonomy.hpp"

#include <cctype>

#include "redeval/errors.hpp"

namespace redeval {

namespace {

const std::vector<TaxonomyTag>& attack_tags() {
  static const std::vector<TaxonomyTag> kTags = {
      {"0", "Baseline"},
      {"1.1.1", "Obfuscation and Encoding"},
      {"1.1.2", "Substitution and Synonyms"},
      {"1.1.3", "Decomposition"},
      {"1.1.4", "Intent Concealment"},
      {"1.2.1", "Heuristic Algorithms"},
      {"1.2.2", "Gradient Estimation"},
      {"1.2.3", "Reinforcement Learning"},
      {"1.3.1", "LLM-Generated Attacks"},
      {"1.3.2", "Multi-Agent Collaboration"},
      {"1.3.3", "Surrogate Models"},
      {"1.4.1", "Multi-Turn Contextual Attacks"},
      {"1.4.2", "Gradual Escalation"},
      {"1.5.1", "Leveraging Behavior Vulnerabilities"},
      {"1.5.2", "Learning Mechanisms Exploits"},
      {"1.5.3", "Decoding and Sampling Strategy Exploits"},
      {"1.5.4", "Defensive Mechanism Bypass"},
      {"2.2.1", "Prefix/Suffix Manipulation"},
      {"2.2.2", "Gradient-Based Optimization"},
  };
  return kTags;
}

const std::vector<TaxonomyTag>& defense_tags() {
  static const std::vector<TaxonomyTag> kTags = {
      {"0", "Baseline"},
      {"1.1.1", "Prompt Analysis"},
      {"1.1.2", "Intention Detection"},
      {"1.2.1", "Semantic Detection"},
      {"1.2.2", "Probability Analysis"},
      {"1.3.1", "Hidden State Detection"},
      {"1.3.2", "Gradient Analysis"},
      {"2.1.1", "Prompt Modification"},
      {"2.1.2", "Safety Prompts"},
      {"2.4.1", "Output Filtering"},
      {"2.4.2", "Self-Evaluation"},
  };
  return kTags;
}

}  // namespace

bool valid_tag_code(std::string_view code) {
  if (code.empty()) return false;
  bool expect_digit = true;
  for (char ch : code) {
    if (expect_digit) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
      expect_digit = false;
    } else if (ch == '.') {
      expect_digit = true;
    } else if (!std::isdigit(static_cast<unsigned char>(ch))) {
      return false;
    }
  }
  return !expect_digit;
}

const std::vector<TaxonomyTag>& taxonomy_table(TagDomain domain) {
  return domain == TagDomain::Attack ? attack_tags() : defense_tags();
}

std::optional<TaxonomyTag> find_tag(TagDomain domain, std::string_view code) {
  for (const auto& tag : taxonomy_table(domain)) {
    if (tag.code == code) return tag;
  }
  return std::nullopt;
}

TaxonomyTag require_tag(TagDomain domain, std::string_view code) {
  if (!valid_tag_code(code)) {
    throw FrameworkError(ErrorKind::Validation,
                         "malformed taxonomy code: '" + std::string(code) + "'");
  }
  if (auto tag = find_tag(domain, code)) return *tag;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown taxonomy code: '" + std::string(code) + "'");
}

}  // namespace redeval
