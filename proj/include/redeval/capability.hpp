#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "redeval/errors.hpp"

namespace redeval {

// Access level a backend advertises or a component requires. No backend in
// this artifact ever advertises gradient access; the gate exists so that
// configs demanding it are rejected before any network activity.
enum class Capability : unsigned {
  BlackBox = 1u << 0,
  WhiteBoxLogprobs = 1u << 1,
  WhiteBoxGradients = 1u << 2,
};

class CapabilitySet {
 public:
  CapabilitySet() = default;
  CapabilitySet(std::initializer_list<Capability> caps) {
    for (Capability c : caps) insert(c);
  }

  void insert(Capability c) { bits_ |= static_cast<unsigned>(c); }

  bool contains(Capability c) const {
    return (bits_ & static_cast<unsigned>(c)) != 0;
  }

  // Requirement check is subset inclusion.
  bool contains_all(CapabilitySet required) const {
    return (bits_ & required.bits_) == required.bits_;
  }

  bool empty() const { return bits_ == 0; }

  bool operator==(const CapabilitySet&) const = default;

  static Capability parse_one(std::string_view name) {
    if (name == "black_box") return Capability::BlackBox;
    if (name == "white_box_logprobs") return Capability::WhiteBoxLogprobs;
    if (name == "white_box_gradients") return Capability::WhiteBoxGradients;
    throw FrameworkError(ErrorKind::Validation,
                         "unknown capability: " + std::string(name));
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (contains(Capability::BlackBox)) out.emplace_back("black_box");
    if (contains(Capability::WhiteBoxLogprobs)) out.emplace_back("white_box_logprobs");
    if (contains(Capability::WhiteBoxGradients)) out.emplace_back("white_box_gradients");
    return out;
  }

 private:
  unsigned bits_ = 0;
};

}  // namespace redeval
