#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace domaincraft {

inline constexpr std::string_view kTimeToken = "<TIME>";
inline constexpr std::string_view kNumberToken = "<NUMBER>";

using StopwordSet = std::unordered_set<std::string>;
using TokenStream = std::vector<std::string>;

// Word tokenization for divergence measurement: splits on whitespace and
// punctuation (punctuation is discarded), maps clock times (h:mm, hh:mm:ss)
// to <TIME> and numerals (digit runs with . or , group separators) to
// <NUMBER>, lowercases cased scripts and drops stopwords. Stopwords are
// matched after lowercasing.
TokenStream normalize_tokenize(std::string_view text,
                               const StopwordSet& stopwords);

// One token per line, UTF-8; blank lines and surrounding space ignored.
StopwordSet load_stopwords(const std::filesystem::path& path);

}  // namespace domaincraft
