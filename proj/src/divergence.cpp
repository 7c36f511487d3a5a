#include "domaincraft/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "domaincraft/error.hpp"

namespace domaincraft {

FreqDist FreqDist::from_probabilities(std::map<std::string, double> probs) {
  double total = 0.0;
  for (const auto& [token, p] : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::kValidation,
                  "invalid probability for token " + token);
    }
    total += p;
  }
  if (total <= 0.0) {
    throw Error(ErrorKind::kEmptyDistribution, "distribution has no mass");
  }
  FreqDist dist;
  for (auto& [token, p] : probs) {
    if (p > 0.0) dist.entries_.emplace_back(token, p / total);
  }
  return dist;
}

double FreqDist::prob(const std::string& token) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), token,
      [](const Entry& e, const std::string& t) { return e.first < t; });
  if (it == entries_.end() || it->first != token) return 0.0;
  return it->second;
}

FreqDist freq_dist(std::span<const TokenStream> streams) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& stream : streams) {
    for (const auto& token : stream) {
      ++counts[token];
      ++total;
    }
  }
  if (total == 0) {
    throw Error(ErrorKind::kEmptyDistribution,
                "cannot build a frequency distribution from empty streams");
  }
  std::map<std::string, double> probs;
  for (const auto& [token, count] : counts) {
    probs.emplace(token, static_cast<double>(count) / static_cast<double>(total));
  }
  // Counts already sum to total; from_probabilities only re-checks.
  FreqDist dist = FreqDist::from_probabilities(std::move(probs));
  return dist;
}

namespace {

// 0.5 p log2(p/m) + 0.5 q log2(q/m) with m = (p+q)/2 and 0 log 0 = 0.
double jsd_term(double p, double q) {
  const double m = 0.5 * (p + q);
  double term = 0.0;
  if (p > 0.0) term += 0.5 * p * std::log2(p / m);
  if (q > 0.0) term += 0.5 * q * std::log2(q / m);
  return term;
}

}  // namespace

double jsd(const FreqDist& p, const FreqDist& q) {
  const auto& a = p.entries();
  const auto& b = q.entries();
  std::size_t i = 0;
  std::size_t j = 0;
  double sum = 0.0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      sum += jsd_term(a[i++].second, 0.0);
    } else if (i == a.size() || b[j].first < a[i].first) {
      sum += jsd_term(0.0, b[j++].second);
    } else {
      sum += jsd_term(a[i++].second, b[j++].second);
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

std::string_view to_string(SidePolicy policy) {
  switch (policy) {
    case SidePolicy::kBoth: return "both";
    case SidePolicy::kSource: return "source";
    case SidePolicy::kTarget: return "target";
  }
  return "both";
}

SidePolicy parse_side_policy(std::string_view text) {
  if (text == "both") return SidePolicy::kBoth;
  if (text == "source") return SidePolicy::kSource;
  if (text == "target") return SidePolicy::kTarget;
  throw Error(ErrorKind::kConfig, "unknown side policy: " + std::string(text));
}

std::string CorpusLabel::str() const {
  return domain.name() + "/" + std::string(to_string(split));
}

namespace {

const StopwordSet& stopwords_for(const StopwordTable& table,
                                 const std::string& lang) {
  static const StopwordSet kNone;
  auto it = table.find(lang);
  return it == table.end() ? kNone : it->second;
}

std::vector<bool> sides_of(SidePolicy policy) {
  switch (policy) {
    case SidePolicy::kSource: return {false};
    case SidePolicy::kTarget: return {true};
    case SidePolicy::kBoth: return {false, true};
  }
  return {false, true};
}

std::string describe(const ParallelCorpus& c) {
  return c.domain().name() + "/" + std::string(to_string(c.split())) + " (" +
         c.lang().str() + ")";
}

}  // namespace

FreqDist side_distribution(std::span<const ParallelCorpus* const> corpora,
                           bool target_side, const StopwordSet& stopwords) {
  std::vector<TokenStream> streams;
  for (const ParallelCorpus* corpus : corpora) {
    for (const auto& pair : corpus->pairs()) {
      streams.push_back(normalize_tokenize(
          target_side ? pair.target : pair.source, stopwords));
    }
  }
  try {
    return freq_dist(streams);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kEmptyDistribution) throw;
    std::string names;
    for (const ParallelCorpus* corpus : corpora) {
      if (!names.empty()) names += ", ";
      names += describe(*corpus);
    }
    throw Error(ErrorKind::kEmptyDistribution,
                "corpus " + names + " has an empty normalized " +
                    (target_side ? "target" : "source") + " token stream");
  }
}

double corpus_jsd(const ParallelCorpus& a, const ParallelCorpus& b,
                  SidePolicy policy, const StopwordTable& stopwords) {
  if (!(a.lang() == b.lang())) {
    throw Error(ErrorKind::kValidation, "cannot compare " + describe(a) +
                                            " with " + describe(b));
  }
  const auto sides = sides_of(policy);
  double sum = 0.0;
  for (bool target_side : sides) {
    const auto& stop = stopwords_for(
        stopwords, target_side ? a.lang().target : a.lang().source);
    const ParallelCorpus* pa[] = {&a};
    const ParallelCorpus* pb[] = {&b};
    sum += jsd(side_distribution(pa, target_side, stop),
               side_distribution(pb, target_side, stop));
  }
  return sum / static_cast<double>(sides.size());
}

DivergenceMatrix divergence_matrix(std::span<const ParallelCorpus> corpora,
                                   SidePolicy policy,
                                   const StopwordTable& stopwords) {
  DivergenceMatrix matrix;
  // label index -> lang pair -> pooled corpora
  std::vector<std::map<LangPair, std::vector<const ParallelCorpus*>>> groups;
  for (const auto& corpus : corpora) {
    CorpusLabel label{corpus.domain(), corpus.split()};
    auto it = std::find(matrix.labels.begin(), matrix.labels.end(), label);
    std::size_t idx;
    if (it == matrix.labels.end()) {
      idx = matrix.labels.size();
      matrix.labels.push_back(label);
      groups.emplace_back();
    } else {
      idx = static_cast<std::size_t>(it - matrix.labels.begin());
    }
    groups[idx][corpus.lang()].push_back(&corpus);
  }
  const std::size_t n = matrix.labels.size();
  if (n < 2) {
    throw Error(ErrorKind::kValidation,
                "divergence matrix needs at least two distinct corpora");
  }

  const auto sides = sides_of(policy);
  // (label, lang pair, side) -> distribution
  std::vector<std::map<std::pair<LangPair, bool>, FreqDist>> dists(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [lang, members] : groups[i]) {
      for (bool target_side : sides) {
        const auto& stop = stopwords_for(
            stopwords, target_side ? lang.target : lang.source);
        dists[i].emplace(std::make_pair(lang, target_side),
                         side_distribution(members, target_side, stop));
      }
    }
  }

  matrix.values.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double lang_sum = 0.0;
      std::size_t lang_count = 0;
      for (const auto& [lang, members] : groups[i]) {
        if (!groups[j].contains(lang)) continue;
        double side_sum = 0.0;
        for (bool target_side : sides) {
          side_sum += jsd(dists[i].at({lang, target_side}),
                          dists[j].at({lang, target_side}));
        }
        lang_sum += side_sum / static_cast<double>(sides.size());
        ++lang_count;
      }
      if (lang_count == 0) {
        throw Error(ErrorKind::kValidation,
                    matrix.labels[i].str() + " and " + matrix.labels[j].str() +
                        " share no language pair");
      }
      const double value = lang_sum / static_cast<double>(lang_count);
      matrix.values[i][j] = value;
      matrix.values[j][i] = value;
    }
  }
  return matrix;
}

void write_matrix_csv(std::ostream& out, const DivergenceMatrix& matrix) {
  out << "label";
  for (const auto& label : matrix.labels) out << ',' << label.str();
  out << '\n';
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << matrix.labels[i].str();
    for (std::size_t j = 0; j < matrix.size(); ++j) {
      out << ',' << matrix.values[i][j];
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace domaincraft
