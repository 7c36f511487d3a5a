#include "domaincraft/model/subword.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "domaincraft/error.hpp"
#include "domaincraft/util/utf8.hpp"

namespace domaincraft {
namespace {

constexpr std::string_view kWordMark = "\xE2\x96\x81";  // U+2581
constexpr std::string_view kUnkText = "\xE2\x81\x87";   // U+2047
constexpr std::string_view kHeader = "domaincraft-bpe 1";

const std::vector<std::string>& special_pieces() {
  static const std::vector<std::string> kPieces = {
      "<pad>", "<s>", "</s>", "<unk>", "<mask>", "<src>", "<tgt>"};
  return kPieces;
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ') ++pos;
    if (pos > start) words.push_back(text.substr(start, pos - start));
  }
  return words;
}

// "▁" followed by the word's code points, each as its own symbol.
std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> symbols;
  symbols.emplace_back(kWordMark);
  std::size_t pos = 0;
  while (pos < word.size()) {
    const std::size_t start = pos;
    if (!utf8::next(word, pos)) pos = start + 1;
    symbols.emplace_back(word.substr(start, pos - start));
  }
  return symbols;
}

std::string merge_key(const std::string& a, const std::string& b) {
  return a + ' ' + b;
}

}  // namespace

SubwordModel::SubwordModel(std::vector<std::string> alphabet,
                           std::vector<std::pair<std::string, std::string>> merges)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)) {
  pieces_ = special_pieces();
  const auto add = [&](const std::string& piece) {
    if (piece_ids_.contains(piece)) {
      throw Error(ErrorKind::kValidation, "duplicate subword piece: " + piece);
    }
    piece_ids_.emplace(piece, static_cast<int>(pieces_.size()));
    pieces_.push_back(piece);
  };
  for (const auto& p : pieces_) piece_ids_.emplace(p, static_cast<int>(piece_ids_.size()));
  for (const auto& c : alphabet_) add(c);
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [a, b] = merges_[r];
    if (!piece_ids_.contains(a) || !piece_ids_.contains(b)) {
      throw Error(ErrorKind::kValidation, "merge uses unknown piece: " + a + " " + b);
    }
    merge_rank_.emplace(merge_key(a, b), static_cast<int>(r));
    add(a + b);
  }
}

std::vector<std::string> SubwordModel::word_pieces(std::string_view word) const {
  std::vector<std::string> symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    int best_rank = -1;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find(merge_key(symbols[i], symbols[i + 1]));
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
      }
    }
    if (best_rank < 0) break;
    const auto& [a, b] = merges_[static_cast<std::size_t>(best_rank)];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
        merged.push_back(a + b);
        ++i;
      } else {
        merged.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(merged);
  }
  return symbols;
}

std::vector<std::string> SubwordModel::encode_pieces(std::string_view text) const {
  const std::string normalized = utf8::squeeze_spaces(text);
  std::vector<std::string> out;
  for (auto word : split_words(normalized)) {
    for (auto& piece : word_pieces(word)) out.push_back(std::move(piece));
  }
  return out;
}

std::vector<int> SubwordModel::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& piece : encode_pieces(text)) {
    auto it = piece_ids_.find(piece);
    ids.push_back(it == piece_ids_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string SubwordModel::decode(std::span<const int> ids) const {
  std::string raw;
  for (int id : ids) {
    if (id == kUnk) {
      raw += kUnkText;
    } else if (id >= kNumSpecials && id < vocab_size()) {
      raw += pieces_[static_cast<std::size_t>(id)];
    }
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    if (raw.compare(pos, kWordMark.size(), kWordMark) == 0) {
      if (!out.empty()) out.push_back(' ');
      pos += kWordMark.size();
    } else {
      out.push_back(raw[pos++]);
    }
  }
  return out;
}

std::string SubwordModel::serialize() const {
  std::ostringstream out;
  out << kHeader << '\n';
  out << "alphabet " << alphabet_.size() << '\n';
  for (const auto& c : alphabet_) out << c << '\n';
  out << "merges " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) out << a << ' ' << b << '\n';
  return out.str();
}

SubwordModel SubwordModel::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  const auto fail = [](const std::string& why) {
    return Error(ErrorKind::kValidation, "malformed subword model: " + why);
  };
  if (!std::getline(in, line) || line != kHeader) throw fail("bad header");
  const auto read_count = [&](std::string_view key) {
    if (!std::getline(in, line) || line.rfind(std::string(key) + " ", 0) != 0) {
      throw fail("missing " + std::string(key));
    }
    return static_cast<std::size_t>(std::stoull(line.substr(key.size() + 1)));
  };
  std::vector<std::string> alphabet;
  const std::size_t n_alpha = read_count("alphabet");
  for (std::size_t i = 0; i < n_alpha; ++i) {
    if (!std::getline(in, line)) throw fail("truncated alphabet");
    alphabet.push_back(line);
  }
  std::vector<std::pair<std::string, std::string>> merges;
  const std::size_t n_merges = read_count("merges");
  for (std::size_t i = 0; i < n_merges; ++i) {
    if (!std::getline(in, line)) throw fail("truncated merges");
    const auto space = line.find(' ');
    if (space == std::string::npos) throw fail("bad merge line");
    merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return SubwordModel(std::move(alphabet), std::move(merges));
}

void SubwordModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << serialize();
}

SubwordModel SubwordModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize(buffer.str());
}

SubwordModel train_bpe(std::span<const ParallelCorpus> corpora, int vocab_size) {
  std::map<std::string, long> word_counts;
  for (const auto& corpus : corpora) {
    for (const auto& pair : corpus.pairs()) {
      for (const std::string* side : {&pair.source, &pair.target}) {
        const std::string normalized = utf8::squeeze_spaces(*side);
        for (auto word : split_words(normalized)) ++word_counts[std::string(word)];
      }
    }
  }

  // Symbol table: id -> piece text. Words are sequences of symbol ids.
  std::vector<std::string> symbols;
  std::unordered_map<std::string, int> symbol_ids;
  const auto intern = [&](const std::string& s) {
    auto [it, inserted] = symbol_ids.emplace(s, static_cast<int>(symbols.size()));
    if (inserted) symbols.push_back(s);
    return it->second;
  };

  std::set<std::string> alphabet_set;
  for (const auto& [word, count] : word_counts) {
    for (auto& s : initial_symbols(word)) alphabet_set.insert(std::move(s));
  }
  if (alphabet_set.empty()) alphabet_set.emplace(kWordMark);
  std::vector<std::string> alphabet(alphabet_set.begin(), alphabet_set.end());
  const int base = SubwordModel::kNumSpecials + static_cast<int>(alphabet.size());
  if (vocab_size <= base) {
    throw Error(ErrorKind::kSize,
                "vocab size " + std::to_string(vocab_size) +
                    " must exceed specials + alphabet = " + std::to_string(base));
  }
  for (const auto& c : alphabet) intern(c);

  struct Word {
    std::vector<int> syms;
    long count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [word, count] : word_counts) {
    Word w{{}, count};
    for (const auto& s : initial_symbols(word)) w.syms.push_back(intern(s));
    words.push_back(std::move(w));
  }

  const auto key_of = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  std::unordered_map<std::uint64_t, long> pair_counts;
  std::unordered_map<std::uint64_t, std::vector<int>> where;
  const auto add_word = [&](int wi, long sign) {
    const auto& w = words[static_cast<std::size_t>(wi)];
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      const auto k = key_of(w.syms[i], w.syms[i + 1]);
      pair_counts[k] += sign * w.count;
      if (sign > 0) where[k].push_back(wi);
    }
  };
  for (int wi = 0; wi < static_cast<int>(words.size()); ++wi) add_word(wi, +1);

  std::vector<std::pair<std::string, std::string>> merges;
  const int max_merges = vocab_size - base;
  while (static_cast<int>(merges.size()) < max_merges) {
    std::uint64_t best = 0;
    long best_count = 1;
    bool found = false;
    for (const auto& [k, count] : pair_counts) {
      if (count < 2) continue;
      if (!found || count > best_count) {
        best = k;
        best_count = count;
        found = true;
      } else if (count == best_count) {
        const int a = static_cast<int>(k >> 32), b = static_cast<int>(k & 0xFFFFFFFFu);
        const int ba = static_cast<int>(best >> 32), bb = static_cast<int>(best & 0xFFFFFFFFu);
        if (std::tie(symbols[static_cast<std::size_t>(a)], symbols[static_cast<std::size_t>(b)]) <
            std::tie(symbols[static_cast<std::size_t>(ba)], symbols[static_cast<std::size_t>(bb)])) {
          best = k;
        }
      }
    }
    if (!found) break;
    const int a = static_cast<int>(best >> 32);
    const int b = static_cast<int>(best & 0xFFFFFFFFu);
    const std::string piece = symbols[static_cast<std::size_t>(a)] +
                              symbols[static_cast<std::size_t>(b)];
    if (symbol_ids.contains(piece)) {
      // Two different splits can spell the same piece; keep the vocabulary
      // unique by retiring the pair without adding a merge.
      pair_counts.erase(best);
      continue;
    }
    merges.emplace_back(symbols[static_cast<std::size_t>(a)],
                        symbols[static_cast<std::size_t>(b)]);
    const int merged = intern(piece);

    std::vector<int> affected = std::move(where[best]);
    where.erase(best);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (int wi : affected) {
      auto& w = words[static_cast<std::size_t>(wi)];
      bool has = false;
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        if (w.syms[i] == a && w.syms[i + 1] == b) {
          has = true;
          break;
        }
      }
      if (!has) continue;
      add_word(wi, -1);
      std::vector<int> next;
      next.reserve(w.syms.size());
      for (std::size_t i = 0; i < w.syms.size(); ++i) {
        if (i + 1 < w.syms.size() && w.syms[i] == a && w.syms[i + 1] == b) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.syms[i]);
        }
      }
      w.syms = std::move(next);
      add_word(wi, +1);
    }
    for (auto it = pair_counts.begin(); it != pair_counts.end();) {
      it = it->second == 0 ? pair_counts.erase(it) : std::next(it);
    }
  }
  return SubwordModel(std::move(alphabet), std::move(merges));
}

}  // namespace domaincraft
