#pragma once

#include <string>
#include <string_view>

namespace redeval {

enum class EncodingScheme { Base64, Rot13, Hex, Binary };

EncodingScheme encoding_scheme_from_string(std::string_view name);
const char* to_string(EncodingScheme scheme);

// Standard encodings of the UTF-8 bytes: base64 per RFC 4648 (standard
// alphabet, padded), rot13 over letters only, lowercase two-digit hex,
// binary as space-separated 8-bit groups. decode(encode(x)) == x.
std::string encode_text(EncodingScheme scheme, std::string_view text);
std::string decode_text(EncodingScheme scheme, std::string_view text);

enum class FlipMode { Chars, Words };

FlipMode flip_mode_from_string(std::string_view name);

// Chars mode reverses the sequence of Unicode scalar values; words mode
// reverses the order of whitespace-delimited tokens while keeping whitespace
// runs in place. Both are involutions.
std::string flip_text(FlipMode mode, std::string_view text);

}  // namespace redeval
