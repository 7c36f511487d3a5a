#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace domaincraft::utf8 {

// Decodes one code point starting at `pos`. Returns nullopt on malformed
// input (overlong forms, surrogates, truncated sequences, > U+10FFFF).
// On success `pos` is advanced past the sequence.
std::optional<char32_t> next(std::string_view text, std::size_t& pos);

bool valid(std::string_view text);

void append(std::string& out, char32_t cp);

std::vector<char32_t> decode(std::string_view text);
std::string encode(const std::vector<char32_t>& cps);

bool is_space(char32_t cp);
bool is_punct(char32_t cp);
// Decimal digit value for ASCII and the Indic script digit blocks, or -1.
int digit_value(char32_t cp);
char32_t to_lower(char32_t cp);

// Collapses runs of whitespace to single spaces and strips both ends.
std::string squeeze_spaces(std::string_view text);

}  // namespace domaincraft::utf8
