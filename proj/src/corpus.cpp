#include "domaincraft/corpus.hpp"

#include <fstream>
#include <numeric>
#include <unordered_set>

#include "domaincraft/error.hpp"
#include "domaincraft/tokenize.hpp"
#include "domaincraft/util/rng.hpp"
#include "domaincraft/util/utf8.hpp"

namespace domaincraft {
namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  const auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
           c == '\f';
  };
  while (begin < end && space(s[begin])) ++begin;
  while (end > begin && space(s[end - 1])) --end;
  return std::string(s.substr(begin, end - begin));
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!utf8::valid(line)) {
      throw Error(ErrorKind::kEncoding,
                  path.string() + ":" + std::to_string(lines.size() + 1) +
                      ": invalid UTF-8");
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

DomainId::DomainId(std::string name)
    : name_(std::move(name)), key_(ascii_lower(name_)) {
  if (trim(name_).empty()) {
    throw Error(ErrorKind::kValidation, "domain id must be non-empty");
  }
}

LangPair::LangPair(std::string src, std::string tgt)
    : source(std::move(src)), target(std::move(tgt)) {
  if (source.empty() || target.empty()) {
    throw Error(ErrorKind::kValidation, "language codes must be non-empty");
  }
  if (ascii_lower(source) == ascii_lower(target)) {
    throw Error(ErrorKind::kValidation,
                "language pair needs distinct sides: " + source);
  }
}

LangPair LangPair::parse(std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    throw Error(ErrorKind::kValidation,
                "language pair must look like src-tgt: " + std::string(text));
  }
  return LangPair(std::string(text.substr(0, dash)),
                  std::string(text.substr(dash + 1)));
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "dev") return Split::kDev;
  if (text == "test") return Split::kTest;
  throw Error(ErrorKind::kValidation, "unknown split: " + std::string(text));
}

ParallelCorpus::ParallelCorpus(DomainId domain, LangPair lang, Split split,
                               std::vector<SentencePair> pairs)
    : domain_(std::move(domain)),
      lang_(std::move(lang)),
      split_(split),
      pairs_(std::move(pairs)) {
  if (pairs_.empty()) {
    throw Error(ErrorKind::kValidation,
                "corpus " + domain_.name() + " has no sentence pairs");
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    auto& p = pairs_[i];
    if (p.source.find('\n') != std::string::npos ||
        p.target.find('\n') != std::string::npos) {
      throw Error(ErrorKind::kValidation,
                  "sentence pair " + std::to_string(i) + " spans lines");
    }
    if (trim(p.source).empty() || trim(p.target).empty()) {
      throw Error(ErrorKind::kValidation,
                  "sentence pair " + std::to_string(i) + " has an empty side");
    }
    p.index = i;
  }
}

namespace {

LoadedCorpus assemble(const std::vector<std::string>& sources,
                      const std::vector<std::string>& targets,
                      const DomainId& domain, const LangPair& lang,
                      Split split) {
  LoadReport report;
  report.lines = sources.size();
  std::vector<SentencePair> pairs;
  pairs.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::string s = trim(sources[i]);
    std::string t = trim(targets[i]);
    if (s.empty() || t.empty()) {
      ++report.dropped;
      continue;
    }
    pairs.push_back({std::move(s), std::move(t), 0});
  }
  if (pairs.empty()) {
    throw Error(ErrorKind::kValidation,
                "corpus " + domain.name() + " is empty after dropping blanks");
  }
  return {ParallelCorpus(domain, lang, split, std::move(pairs)), report};
}

}  // namespace

LoadedCorpus load_parallel(const std::filesystem::path& source_path,
                           const std::filesystem::path& target_path,
                           const DomainId& domain, const LangPair& lang,
                           Split split) {
  const auto sources = read_lines(source_path);
  const auto targets = read_lines(target_path);
  if (sources.size() != targets.size()) {
    throw Error(ErrorKind::kAlignment,
                source_path.string() + " has " +
                    std::to_string(sources.size()) + " lines but " +
                    target_path.string() + " has " +
                    std::to_string(targets.size()));
  }
  return assemble(sources, targets, domain, lang, split);
}

LoadedCorpus load_tsv(const std::filesystem::path& path,
                      const DomainId& domain, const LangPair& lang,
                      Split split) {
  const auto lines = read_lines(path);
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  sources.reserve(lines.size());
  targets.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorKind::kAlignment, path.string() + ":" +
                                             std::to_string(i + 1) +
                                             ": expected exactly 2 columns");
    }
    sources.push_back(line.substr(0, tab));
    targets.push_back(line.substr(tab + 1));
  }
  return assemble(sources, targets, domain, lang, split);
}

void save_parallel(const ParallelCorpus& corpus,
                   const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path) {
  std::ofstream src(source_path, std::ios::binary);
  std::ofstream tgt(target_path, std::ios::binary);
  if (!src || !tgt) {
    throw Error(ErrorKind::kIo, "cannot write " + source_path.string());
  }
  for (const auto& p : corpus.pairs()) {
    src << p.source << '\n';
    tgt << p.target << '\n';
  }
}

void save_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& p : corpus.pairs()) {
    out << p.source << '\t' << p.target << '\n';
  }
}

ParallelCorpus sample(const ParallelCorpus& corpus, std::size_t n,
                      std::uint64_t seed) {
  if (n < 1 || n > corpus.size()) {
    throw Error(ErrorKind::kSize,
                "cannot sample " + std::to_string(n) + " pairs from " +
                    corpus.domain().name() + " (size " +
                    std::to_string(corpus.size()) + ")");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first n slots are a uniform n-subset in
  // uniform order.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<SentencePair> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pairs.push_back(corpus[order[i]]);
  return ParallelCorpus(corpus.domain(), corpus.lang(), corpus.split(),
                        std::move(pairs));
}

CorpusStats corpus_stats(const ParallelCorpus& corpus) {
  CorpusStats stats;
  stats.pairs = corpus.size();
  const StopwordSet none;
  std::unordered_set<std::string> src_types;
  std::unordered_set<std::string> tgt_types;
  for (const auto& p : corpus.pairs()) {
    for (auto& t : normalize_tokenize(p.source, none)) {
      ++stats.source_tokens;
      src_types.insert(std::move(t));
    }
    for (auto& t : normalize_tokenize(p.target, none)) {
      ++stats.target_tokens;
      tgt_types.insert(std::move(t));
    }
  }
  stats.source_types = src_types.size();
  stats.target_types = tgt_types.size();
  return stats;
}

}  // namespace domaincraft
