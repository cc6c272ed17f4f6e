#include "capypipe/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace capypipe {

namespace {

std::string collapse_whitespace(std::u32string_view text) {
  std::u32string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t c : text) {
    if (is_unicode_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return u32_to_utf8(out);
}

std::u32string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString dst = normalizer->normalize(src, status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("ICU NFC normalization failed");
  }
  std::string utf8;
  dst.toUTF8String(utf8);
  return utf8_to_u32(utf8);
}

}  // namespace

bool is_unicode_space(char32_t c) {
  if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
      c == U'\v') {
    return true;
  }
  return c > 0x7F && u_isUWhiteSpace(static_cast<UChar32>(c));
}

std::u32string utf8_to_u32(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    char32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + len > n) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                          (len == 4 && cp < 0x10000);
    if (!ok || overlong || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string u32_to_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::string normalize_text(std::string_view text, Normalization mode) {
  switch (mode) {
    case Normalization::None:
      return std::string(text);
    case Normalization::Whitespace:
      return collapse_whitespace(utf8_to_u32(text));
    case Normalization::Full:
      break;
  }
  std::u32string chars = nfc(text);
  for (char32_t& c : chars) {
    if (c >= 0xFF10 && c <= 0xFF19) {  // full-width digits
      c = U'0' + (c - 0xFF10);
      continue;
    }
    if (c < 0x80) {
      if (c >= U'A' && c <= U'Z') c += 32;
      continue;
    }
    UErrorCode status = U_ZERO_ERROR;
    if (uscript_getScript(static_cast<UChar32>(c), &status) == USCRIPT_LATIN &&
        U_SUCCESS(status)) {
      c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
    }
  }
  return collapse_whitespace(chars);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  const std::u32string chars = utf8_to_u32(text);
  std::u32string current;
  for (char32_t c : chars) {
    if (is_unicode_space(c)) {
      if (!current.empty()) {
        words.push_back(u32_to_utf8(current));
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(u32_to_utf8(current));
  return words;
}

std::u32string chars_without_space(std::string_view text) {
  std::u32string out;
  for (char32_t c : utf8_to_u32(text)) {
    if (!is_unicode_space(c)) out.push_back(c);
  }
  return out;
}

}  // namespace capypipe
