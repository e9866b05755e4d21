#include "redeval/unicode.hpp"

#include <cstdint>

namespace redeval {

std::vector<std::string_view> utf8_spans(std::string_view text) {
  std::vector<std::string_view> spans;
  spans.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xf0) {
      len = 4;
    } else if (lead >= 0xe0) {
      len = 3;
    } else if (lead >= 0xc0) {
      len = 2;
    }
    if (i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xc0) != 0x80) {
        len = 1;
        break;
      }
    }
    spans.push_back(text.substr(i, len));
    i += len;
  }
  return spans;
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char lead = static_cast<unsigned char>(text[i]);
    std::size_t len;
    std::uint32_t min_value;
    if (lead < 0x80) {
      i += 1;
      continue;
    } else if ((lead & 0xe0) == 0xc0) {
      len = 2;
      min_value = 0x80;
    } else if ((lead & 0xf0) == 0xe0) {
      len = 3;
      min_value = 0x800;
    } else if ((lead & 0xf8) == 0xf0) {
      len = 4;
      min_value = 0x10000;
    } else {
      return false;
    }
    if (i + len > text.size()) return false;
    std::uint32_t value = lead & (0x7f >> len);
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xc0) != 0x80) return false;
      value = (value << 6) | (cont & 0x3f);
    }
    if (value < min_value) return false;                    // overlong
    if (value > 0x10ffff) return false;                     // out of range
    if (value >= 0xd800 && value <= 0xdfff) return false;   // surrogate
    i += len;
  }
  return true;
}

}  // namespace redeval
