#pragma once

// UTF-8 helpers. All text offsets in causelens count Unicode scalar values.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "causelens/error.hpp"

namespace causelens::unicode {

inline std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  std::size_t i = 0;
  while (i < utf8.size()) {
    const auto b0 = static_cast<unsigned char>(utf8[i]);
    char32_t cp = 0;
    int extra = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      extra = 1;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      extra = 2;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      extra = 3;
    } else {
      throw Error(ErrorCode::kParse,
                  "invalid UTF-8 lead byte at byte " + std::to_string(i));
    }
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= utf8.size()) {
        throw Error(ErrorCode::kParse,
                    "truncated UTF-8 sequence at byte " + std::to_string(i));
      }
      const auto b = static_cast<unsigned char>(utf8[i + k]);
      if ((b & 0xC0) != 0x80) {
        throw Error(ErrorCode::kParse,
                    "invalid UTF-8 continuation at byte " + std::to_string(i + k));
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) append(out, cp);
  return out;
}

// Number of scalar values in a UTF-8 string.
inline std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

// Substring by scalar offsets [start, end).
inline std::string substr(std::string_view utf8, std::size_t start, std::size_t end) {
  const auto text = decode(utf8);
  if (start > end || end > text.size()) {
    throw Error(ErrorCode::kOffsetRange, "scalar range [" + std::to_string(start) + "," +
                                             std::to_string(end) + ") outside text of length " +
                                             std::to_string(text.size()));
  }
  return encode(std::u32string_view(text).substr(start, end - start));
}

inline bool is_whitespace(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' ||
         cp == U'\f' || cp == 0x00A0 || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200B);
}

// ASCII punctuation plus the general, CJK and fullwidth punctuation blocks.
inline bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  return (cp >= 0x2010 && cp <= 0x205E) || (cp >= 0x3001 && cp <= 0x303F) ||
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
         cp == 0x00A1 || cp == 0x00BF || cp == 0x00B7;
}

inline bool is_sentence_end(char32_t cp) {
  return cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x3002 || cp == 0xFF01 ||
         cp == 0xFF1F || cp == 0xFF0E;
}

inline char32_t ascii_lower(char32_t cp) {
  return (cp >= U'A' && cp <= U'Z') ? cp - U'A' + U'a' : cp;
}

inline char32_t ascii_upper(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') ? cp - U'a' + U'A' : cp;
}

inline std::string capitalize_first(std::string_view utf8) {
  auto text = decode(utf8);
  if (!text.empty()) text[0] = ascii_upper(text[0]);
  return encode(text);
}

}  // namespace causelens::unicode
