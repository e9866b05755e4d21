#pragma once

#include <string_view>
#include <vector>

namespace redeval {

// Splits UTF-8 text into scalar-value spans; malformed sequences fall back to
// single bytes so every transformation over spans stays lossless.
std::vector<std::string_view> utf8_spans(std::string_view text);

bool is_valid_utf8(std::string_view text);

}  // namespace redeval
