#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "domaincraft/corpus.hpp"
#include "domaincraft/tokenize.hpp"

namespace domaincraft {

// Normalized token frequencies. Entries are kept sorted by token so every
// summation over the support runs in a fixed order.
class FreqDist {
 public:
  using Entry = std::pair<std::string, double>;

  FreqDist() = default;
  // Takes raw probabilities over a support; zero entries are dropped and the
  // rest renormalized. Throws on negative mass or an empty support.
  static FreqDist from_probabilities(std::map<std::string, double> probs);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  double prob(const std::string& token) const;

 private:
  std::vector<Entry> entries_;
};

// prob(t) = count(t) / total over all streams.
FreqDist freq_dist(std::span<const TokenStream> streams);

// Jensen-Shannon divergence in bits: 0.5 KL(P||M) + 0.5 KL(Q||M) with
// M = (P + Q) / 2, so the value lies in [0, 1].
double jsd(const FreqDist& p, const FreqDist& q);

enum class SidePolicy { kBoth, kSource, kTarget };

std::string_view to_string(SidePolicy policy);
SidePolicy parse_side_policy(std::string_view text);

// Stopword lists keyed by language code; missing languages use none.
using StopwordTable = std::map<std::string, StopwordSet>;

struct CorpusLabel {
  DomainId domain;
  Split split;

  std::string str() const;
  friend bool operator==(const CorpusLabel&, const CorpusLabel&) = default;
};

struct DivergenceMatrix {
  std::vector<CorpusLabel> labels;
  std::vector<std::vector<double>> values;

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i][j]; }
};

// Frequency distribution of one language side of a corpus (or of several
// corpora pooled together).
FreqDist side_distribution(std::span<const ParallelCorpus* const> corpora,
                           bool target_side, const StopwordSet& stopwords);

// Average per-side JSD between two corpora of the same language pair.
double corpus_jsd(const ParallelCorpus& a, const ParallelCorpus& b,
                  SidePolicy policy, const StopwordTable& stopwords);

// JSD between every pair of (domain, split) labels. For each pair the
// per-side values are averaged, then averaged across the language pairs
// both labels cover. Corpora sharing a label and language pair are pooled.
DivergenceMatrix divergence_matrix(std::span<const ParallelCorpus> corpora,
                                   SidePolicy policy,
                                   const StopwordTable& stopwords);

// Labels as header row and first column; values with 6 decimals.
void write_matrix_csv(std::ostream& out, const DivergenceMatrix& matrix);

}  // namespace domaincraft
