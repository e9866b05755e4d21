#include "redeval/transforms.hpp"

#include <array>
#include <cctype>
#include <vector>

#include "redeval/errors.hpp"
#include "redeval/unicode.hpp"

namespace redeval {

namespace {

constexpr char kBase64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string base64_encode(std::string_view input) {
  std::string out;
  out.reserve((input.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= input.size()) {
    const unsigned v = (static_cast<unsigned char>(input[i]) << 16) |
                       (static_cast<unsigned char>(input[i + 1]) << 8) |
                       static_cast<unsigned char>(input[i + 2]);
    out.push_back(kBase64Alphabet[(v >> 18) & 63]);
    out.push_back(kBase64Alphabet[(v >> 12) & 63]);
    out.push_back(kBase64Alphabet[(v >> 6) & 63]);
    out.push_back(kBase64Alphabet[v & 63]);
    i += 3;
  }
  const std::size_t rest = input.size() - i;
  if (rest == 1) {
    const unsigned v = static_cast<unsigned char>(input[i]) << 16;
    out.push_back(kBase64Alphabet[(v >> 18) & 63]);
    out.push_back(kBase64Alphabet[(v >> 12) & 63]);
    out.append("==");
  } else if (rest == 2) {
    const unsigned v = (static_cast<unsigned char>(input[i]) << 16) |
                       (static_cast<unsigned char>(input[i + 1]) << 8);
    out.push_back(kBase64Alphabet[(v >> 18) & 63]);
    out.push_back(kBase64Alphabet[(v >> 12) & 63]);
    out.push_back(kBase64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(std::string_view input) {
  if (input.size() % 4 != 0) {
    throw FrameworkError(ErrorKind::Parse, "base64 length must be a multiple of 4");
  }
  std::string out;
  out.reserve(input.size() / 4 * 3);
  for (std::size_t i = 0; i < input.size(); i += 4) {
    int values[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = input[i + k];
      if (c == '=') {
        if (i + 4 != input.size() || k < 2) {
          throw FrameworkError(ErrorKind::Parse, "misplaced base64 padding");
        }
        values[k] = 0;
        ++pad;
      } else {
        if (pad > 0) {
          throw FrameworkError(ErrorKind::Parse, "base64 data after padding");
        }
        values[k] = base64_value(c);
        if (values[k] < 0) {
          throw FrameworkError(ErrorKind::Parse, "invalid base64 character");
        }
      }
    }
    const unsigned v = (values[0] << 18) | (values[1] << 12) | (values[2] << 6) | values[3];
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

std::string rot13(std::string_view input) {
  std::string out(input);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') {
      c = static_cast<char>('a' + (c - 'a' + 13) % 26);
    } else if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>('A' + (c - 'A' + 13) % 26);
    }
  }
  return out;
}

std::string hex_encode(std::string_view input) {
  static const char* kDigits = "0123456789abcdef";
  std::string out;
  out.reserve(input.size() * 2);
  for (unsigned char byte : input) {
    out.push_back(kDigits[byte >> 4]);
    out.push_back(kDigits[byte & 0xf]);
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string hex_decode(std::string_view input) {
  if (input.size() % 2 != 0) {
    throw FrameworkError(ErrorKind::Parse, "hex length must be even");
  }
  std::string out;
  out.reserve(input.size() / 2);
  for (std::size_t i = 0; i < input.size(); i += 2) {
    const int hi = hex_value(input[i]);
    const int lo = hex_value(input[i + 1]);
    if (hi < 0 || lo < 0) {
      throw FrameworkError(ErrorKind::Parse, "invalid hex digit");
    }
    out.push_back(static_cast<char>((hi << 4) | lo));
  }
  return out;
}

std::string binary_encode(std::string_view input) {
  std::string out;
  if (input.empty()) return out;
  out.reserve(input.size() * 9 - 1);
  bool first = true;
  for (unsigned char byte : input) {
    if (!first) out.push_back(' ');
    first = false;
    for (int bit = 7; bit >= 0; --bit) {
      out.push_back((byte >> bit) & 1 ? '1' : '0');
    }
  }
  return out;
}

std::string binary_decode(std::string_view input) {
  std::string out;
  if (input.empty()) return out;
  std::size_t pos = 0;
  while (pos < input.size()) {
    if (pos + 8 > input.size()) {
      throw FrameworkError(ErrorKind::Parse, "truncated binary group");
    }
    unsigned char byte = 0;
    for (std::size_t k = 0; k < 8; ++k) {
      const char c = input[pos + k];
      if (c != '0' && c != '1') {
        throw FrameworkError(ErrorKind::Parse, "invalid binary digit");
      }
      byte = static_cast<unsigned char>((byte << 1) | (c == '1'));
    }
    out.push_back(static_cast<char>(byte));
    pos += 8;
    if (pos < input.size()) {
      if (input[pos] != ' ') {
        throw FrameworkError(ErrorKind::Parse, "binary groups must be space-separated");
      }
      ++pos;
    }
  }
  return out;
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string flip_chars(std::string_view text) {
  const auto spans = utf8_spans(text);
  std::string out;
  out.reserve(text.size());
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) out.append(*it);
  return out;
}

// Reverses the order of the non-whitespace runs while leaving every
// whitespace run where it is, which makes the transform an involution even
// for irregular spacing.
std::string flip_words(std::string_view text) {
  struct Run {
    std::size_t begin, length;
    bool space;
  };
  std::vector<Run> runs;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool space = is_ascii_space(text[i]);
    std::size_t j = i;
    while (j < text.size() && is_ascii_space(text[j]) == space) ++j;
    runs.push_back({i, j - i, space});
    i = j;
  }
  std::vector<std::string_view> words;
  for (const Run& run : runs) {
    if (!run.space) words.push_back(text.substr(run.begin, run.length));
  }
  std::string out;
  out.reserve(text.size());
  std::size_t next_word = words.size();
  for (const Run& run : runs) {
    if (run.space) {
      out.append(text.substr(run.begin, run.length));
    } else {
      out.append(words[--next_word]);
    }
  }
  return out;
}

}  // namespace

EncodingScheme encoding_scheme_from_string(std::string_view name) {
  if (name == "base64") return EncodingScheme::Base64;
  if (name == "rot13") return EncodingScheme::Rot13;
  if (name == "hex") return EncodingScheme::Hex;
  if (name == "binary") return EncodingScheme::Binary;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown encoding scheme: " + std::string(name));
}

const char* to_string(EncodingScheme scheme) {
  switch (scheme) {
    case EncodingScheme::Base64: return "base64";
    case EncodingScheme::Rot13: return "rot13";
    case EncodingScheme::Hex: return "hex";
    case EncodingScheme::Binary: return "binary";
  }
  return "unknown";
}

std::string encode_text(EncodingScheme scheme, std::string_view text) {
  switch (scheme) {
    case EncodingScheme::Base64: return base64_encode(text);
    case EncodingScheme::Rot13: return rot13(text);
    case EncodingScheme::Hex: return hex_encode(text);
    case EncodingScheme::Binary: return binary_encode(text);
  }
  throw FrameworkError(ErrorKind::Validation, "unknown encoding scheme");
}

std::string decode_text(EncodingScheme scheme, std::string_view text) {
  switch (scheme) {
    case EncodingScheme::Base64: return base64_decode(text);
    case EncodingScheme::Rot13: return rot13(text);
    case EncodingScheme::Hex: return hex_decode(text);
    case EncodingScheme::Binary: return binary_decode(text);
  }
  throw FrameworkError(ErrorKind::Validation, "unknown encoding scheme");
}

FlipMode flip_mode_from_string(std::string_view name) {
  if (name == "chars") return FlipMode::Chars;
  if (name == "words") return FlipMode::Words;
  throw FrameworkError(ErrorKind::Validation,
                       "unknown flip mode: " + std::string(name));
}

std::string flip_text(FlipMode mode, std::string_view text) {
  return mode == FlipMode::Chars ? flip_chars(text) : flip_words(text);
}

}  // namespace redeval
