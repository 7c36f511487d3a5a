#include "domaincraft/tokenize.hpp"

#include <fstream>

#include "domaincraft/error.hpp"
#include "domaincraft/util/utf8.hpp"

namespace domaincraft {
namespace {

bool is_digit(char32_t cp) { return utf8::digit_value(cp) >= 0; }

std::size_t digit_run(const std::vector<char32_t>& cps, std::size_t i) {
  std::size_t j = i;
  while (j < cps.size() && is_digit(cps[j])) ++j;
  return j - i;
}

// Length of an h:mm or h:mm:ss clock expression starting at i, or 0.
std::size_t match_time(const std::vector<char32_t>& cps, std::size_t i) {
  const std::size_t hours = digit_run(cps, i);
  if (hours < 1 || hours > 2) return 0;
  std::size_t j = i + hours;
  int groups = 0;
  while (groups < 2 && j < cps.size() && cps[j] == ':' &&
         digit_run(cps, j + 1) == 2) {
    j += 3;
    ++groups;
  }
  if (groups == 0) return 0;
  if (j < cps.size() && is_digit(cps[j])) return 0;
  return j - i;
}

// Digit runs joined by single '.' or ',' separators.
std::size_t match_number(const std::vector<char32_t>& cps, std::size_t i) {
  std::size_t j = i + digit_run(cps, i);
  while (j + 1 < cps.size() && (cps[j] == '.' || cps[j] == ',') &&
         is_digit(cps[j + 1])) {
    j += 1 + digit_run(cps, j + 1);
  }
  return j - i;
}

}  // namespace

TokenStream normalize_tokenize(std::string_view text,
                               const StopwordSet& stopwords) {
  const auto cps = utf8::decode(text);
  TokenStream out;
  std::vector<char32_t> word;
  const auto flush = [&] {
    if (word.empty()) return;
    std::string token = utf8::encode(word);
    word.clear();
    if (!stopwords.contains(token)) out.push_back(std::move(token));
  };
  const auto emit = [&](std::string_view special) {
    flush();
    std::string token(special);
    if (!stopwords.contains(token)) out.push_back(std::move(token));
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t cp = cps[i];
    if (utf8::is_space(cp) || utf8::is_punct(cp)) {
      flush();
      ++i;
      continue;
    }
    // Numerals only start a numeric token at a word boundary, so "b2b"
    // stays one word.
    if (is_digit(cp) && word.empty()) {
      if (const std::size_t n = match_time(cps, i); n > 0) {
        emit(kTimeToken);
        i += n;
        continue;
      }
      emit(kNumberToken);
      i += match_number(cps, i);
      continue;
    }
    word.push_back(utf8::to_lower(cp));
    ++i;
  }
  flush();
  return out;
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  StopwordSet words;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!utf8::valid(line)) {
      throw Error(ErrorKind::kEncoding, path.string() + ":" +
                                            std::to_string(lineno) +
                                            ": invalid UTF-8");
    }
    std::string word = utf8::squeeze_spaces(line);
    if (word.empty()) continue;
    std::vector<char32_t> cps = utf8::decode(word);
    for (auto& cp : cps) cp = utf8::to_lower(cp);
    words.insert(utf8::encode(cps));
  }
  return words;
}

}  // namespace domaincraft
