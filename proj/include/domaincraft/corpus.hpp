#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace domaincraft {

// Short corpus-domain identifier ("bible", "cc", "flores", ...). Comparison
// ignores ASCII case; the spelling given first is kept for display.
class DomainId {
 public:
  explicit DomainId(std::string name);

  const std::string& name() const { return name_; }
  const std::string& key() const { return key_; }

  friend bool operator==(const DomainId& a, const DomainId& b) {
    return a.key_ == b.key_;
  }
  friend std::strong_ordering operator<=>(const DomainId& a,
                                          const DomainId& b) {
    return a.key_ <=> b.key_;
  }

 private:
  std::string name_;
  std::string key_;
};

struct LangPair {
  std::string source;
  std::string target;

  LangPair(std::string source, std::string target);

  // "en-si" -> {en, si}
  static LangPair parse(std::string_view text);
  std::string str() const { return source + "-" + target; }

  friend bool operator==(const LangPair&, const LangPair&) = default;
  friend auto operator<=>(const LangPair&, const LangPair&) = default;
};

enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SentencePair {
  std::string source;
  std::string target;
  std::size_t index = 0;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

// Immutable after construction: non-empty, indices dense 0..n-1.
class ParallelCorpus {
 public:
  ParallelCorpus(DomainId domain, LangPair lang, Split split,
                 std::vector<SentencePair> pairs);

  const DomainId& domain() const { return domain_; }
  const LangPair& lang() const { return lang_; }
  Split split() const { return split_; }
  const std::vector<SentencePair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  const SentencePair& operator[](std::size_t i) const { return pairs_[i]; }

 private:
  DomainId domain_;
  LangPair lang_;
  Split split_;
  std::vector<SentencePair> pairs_;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t dropped = 0;
};

struct LoadedCorpus {
  ParallelCorpus corpus;
  LoadReport report;
};

// Line i of each file becomes pair i. Pairs with an empty side (after
// trimming) are dropped and counted in the report.
LoadedCorpus load_parallel(const std::filesystem::path& source_path,
                           const std::filesystem::path& target_path,
                           const DomainId& domain, const LangPair& lang,
                           Split split);

// Tab-separated, two columns, no header.
LoadedCorpus load_tsv(const std::filesystem::path& path,
                      const DomainId& domain, const LangPair& lang,
                      Split split);

void save_parallel(const ParallelCorpus& corpus,
                   const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path);
void save_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path);

// Uniform sample of n pairs without replacement, in sampled order and
// re-indexed. Deterministic for a fixed (corpus, n, seed).
ParallelCorpus sample(const ParallelCorpus& corpus, std::size_t n,
                      std::uint64_t seed);

struct CorpusStats {
  std::size_t pairs = 0;
  std::size_t source_tokens = 0;
  std::size_t target_tokens = 0;
  std::size_t source_types = 0;
  std::size_t target_types = 0;
};

// Counts use the divergence tokenizer with no stopwords.
CorpusStats corpus_stats(const ParallelCorpus& corpus);

}  // namespace domaincraft
