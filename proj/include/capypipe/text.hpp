#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace capypipe {

// Text normalization applied before every string metric and before
// duplicate detection.
enum class Normalization {
  None,        // bytes compared verbatim
  Whitespace,  // collapse whitespace runs, trim
  Full,        // NFC, Latin lowercase, full-width digit folding, whitespace
};

std::string normalize_text(std::string_view text,
                           Normalization mode = Normalization::Full);

// Decodes UTF-8 into Unicode scalar values. Invalid sequences become U+FFFD.
std::u32string utf8_to_u32(std::string_view text);
std::string u32_to_utf8(std::u32string_view text);

// Whitespace-separated tokens (ASCII and Unicode whitespace).
std::vector<std::string> split_words(std::string_view text);

// Code points of `text` with all whitespace removed.
std::u32string chars_without_space(std::string_view text);

bool is_unicode_space(char32_t c);

}  // namespace capypipe
