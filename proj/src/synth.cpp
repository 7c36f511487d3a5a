#include "domaincraft/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "domaincraft/divergence.hpp"
#include "domaincraft/error.hpp"
#include "domaincraft/util/rng.hpp"

namespace domaincraft {

void SynthSpec::validate() const {
  if (domains.empty()) throw Error(ErrorKind::kConfig, "synth needs at least one domain");
  std::set<DomainId> seen;
  for (const auto& d : domains) {
    if (!seen.insert(d.domain).second) {
      throw Error(ErrorKind::kConfig, "duplicate synth domain " + d.domain.name());
    }
    if (d.vocab_size < 1) throw Error(ErrorKind::kConfig, "synth vocab_size must be >= 1");
    if (!(d.overlap >= 0.0 && d.overlap <= 1.0)) {
      throw Error(ErrorKind::kConfig, "synth overlap must lie in [0, 1]");
    }
  }
  if (min_len < 1 || max_len < min_len) {
    throw Error(ErrorKind::kConfig, "synth sentence lengths need 1 <= min_len <= max_len");
  }
  if (train_size < 1 || test_size < 1) {
    throw Error(ErrorKind::kConfig, "synth train and test sizes must be >= 1");
  }
  if (!(zipf_exponent >= 0.0)) throw Error(ErrorKind::kConfig, "zipf exponent must be >= 0");
  if (!(zipf_offset >= 0.0)) throw Error(ErrorKind::kConfig, "zipf offset must be >= 0");
}

namespace {

constexpr const char* kSrcConsonants = "bdfgklmnprstvz";
constexpr const char* kSrcVowels = "aeiou";
constexpr const char* kTgtConsonants = "chjkqswxy";
constexpr const char* kTgtVowels = "aeiouy";

std::string pseudo_word(Rng& rng, const char* consonants, const char* vowels, int syllables) {
  const std::string_view c(consonants);
  const std::string_view v(vowels);
  std::string w;
  for (int i = 0; i < syllables; ++i) {
    w += c[rng.uniform_index(c.size())];
    w += v[rng.uniform_index(v.size())];
  }
  return w;
}

// Source and target vocabularies with the bijection between them.
class Lexicon {
 public:
  explicit Lexicon(const SynthSpec& spec) {
    int core = 0;
    for (const auto& d : spec.domains) core = std::max(core, d.vocab_size);
    Rng src(derive_seed(spec.translation_seed, "source-words"));
    Rng tgt(derive_seed(spec.translation_seed, "target-words"));
    for (int r = 0; r < core; ++r) core_.push_back(add(src, tgt));
    std::vector<const SynthDomain*> by_key;
    for (const auto& d : spec.domains) by_key.push_back(&d);
    std::sort(by_key.begin(), by_key.end(),
              [](const SynthDomain* a, const SynthDomain* b) { return a->domain < b->domain; });
    for (const auto* d : by_key) {
      Rng psrc(derive_seed(spec.translation_seed, "private/" + d->domain.key()));
      auto& words = private_[d->domain.key()];
      for (int r = 0; r < d->vocab_size; ++r) words.push_back(add(psrc, tgt));
    }
  }

  const std::string& core(int rank) const { return core_[static_cast<std::size_t>(rank)]; }
  const std::string& own(const DomainId& d, int rank) const {
    return private_.at(d.key())[static_cast<std::size_t>(rank)];
  }
  const std::string* target(const std::string& word) const {
    const auto it = map_.find(word);
    return it == map_.end() ? nullptr : &it->second;
  }

 private:
  std::string add(Rng& src, Rng& tgt) {
    std::string s, t;
    do {
      s = pseudo_word(src, kSrcConsonants, kSrcVowels, 2 + static_cast<int>(src.uniform_index(2)));
    } while (map_.contains(s));
    do {
      t = pseudo_word(tgt, kTgtConsonants, kTgtVowels, 2 + static_cast<int>(tgt.uniform_index(2)));
    } while (targets_.contains(t));
    targets_.insert(t);
    map_.emplace(s, t);
    return s;
  }

  std::vector<std::string> core_;
  std::map<std::string, std::vector<std::string>> private_;
  std::unordered_map<std::string, std::string> map_;
  std::set<std::string> targets_;
};

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::string translate_words(const Lexicon& lex, const std::vector<std::string>& words) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    const auto* t = lex.target(w);
    out.push_back(t != nullptr ? *t : w);
  }
  for (std::size_t i = 0; i + 1 < out.size(); i += 2) std::swap(out[i], out[i + 1]);
  std::string joined;
  for (const auto& w : out) {
    if (!joined.empty()) joined += ' ';
    joined += w;
  }
  return joined;
}

std::vector<double> zipf_cdf(int n, double s, double offset) {
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (int r = 0; r < n; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1) + offset, s);
    cdf[static_cast<std::size_t>(r)] = acc;
  }
  for (auto& c : cdf) c /= acc;
  return cdf;
}

std::vector<ParallelCorpus> generate_with(const SynthSpec& spec, const Lexicon& lex) {
  std::vector<ParallelCorpus> out;
  for (const auto& d : spec.domains) {
    // Which ranks hold core words. The coins do not depend on the overlap
    // value, so raising it only ever converts private ranks to core.
    Rng coin(derive_seed(spec.generation_seed, "overlap/" + d.domain.key()));
    std::vector<const std::string*> words;
    for (int r = 0; r < d.vocab_size; ++r) {
      const bool core = coin.uniform01() < d.overlap;
      words.push_back(core ? &lex.core(r) : &lex.own(d.domain, r));
    }
    const auto cdf = zipf_cdf(d.vocab_size, spec.zipf_exponent, spec.zipf_offset);
    std::vector<std::pair<Split, std::size_t>> splits = {{Split::kTrain, spec.train_size}};
    if (spec.dev_size > 0) splits.emplace_back(Split::kDev, spec.dev_size);
    splits.emplace_back(Split::kTest, spec.test_size);
    for (const auto& [split, size] : splits) {
      const std::uint64_t seed = derive_seed(
          derive_seed(spec.generation_seed, "sentences/" + d.domain.key()),
          std::string(to_string(split)));
      Rng rng(seed);
      std::vector<SentencePair> pairs;
      pairs.reserve(size);
      for (std::size_t i = 0; i < size; ++i) {
        const int len = spec.min_len +
                        static_cast<int>(rng.uniform_index(
                            static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
        std::vector<std::string> sent;
        for (int k = 0; k < len; ++k) {
          const double u = rng.uniform01();
          const auto r = static_cast<std::size_t>(
              std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
          sent.push_back(*words[std::min(r, words.size() - 1)]);
        }
        std::string src;
        for (const auto& w : sent) {
          if (!src.empty()) src += ' ';
          src += w;
        }
        pairs.push_back({src, translate_words(lex, sent), i});
      }
      out.emplace_back(d.domain, spec.lang, split, std::move(pairs));
    }
  }
  return out;
}

}  // namespace

std::vector<ParallelCorpus> generate(const SynthSpec& spec) {
  spec.validate();
  return generate_with(spec, Lexicon(spec));
}

std::string synth_translate(const SynthSpec& spec, const std::string& source) {
  spec.validate();
  return translate_words(Lexicon(spec), split_words(source));
}

Calibration calibrate_overlap(double target_jsd, const SynthSpec& spec_template,
                              double tolerance) {
  spec_template.validate();
  if (!(target_jsd >= 0.0 && target_jsd <= 1.0)) {
    throw Error(ErrorKind::kValidation, "target JSD must lie in [0, 1]");
  }
  SynthSpec spec = spec_template;
  const SynthDomain probe = spec_template.domains.front();
  SynthDomain reference = probe;
  reference.domain = DomainId(probe.domain.key() == "reference" ? "reference-core" : "reference");
  reference.overlap = 1.0;
  spec.domains = {reference, probe};
  spec.dev_size = 0;
  spec.test_size = 1;
  const Lexicon lex(spec);

  const auto measure = [&](double overlap) {
    spec.domains[1].overlap = overlap;
    const auto corpora = generate_with(spec, lex);
    // corpora: reference train/test, probe train/test
    return corpus_jsd(corpora[0], corpora[2], SidePolicy::kBoth, {});
  };

  const double at_one = measure(1.0);
  const double at_zero = measure(0.0);
  Calibration best{1.0, at_one};
  const auto consider = [&](double o, double j) {
    if (std::abs(j - target_jsd) < std::abs(best.measured_jsd - target_jsd)) best = {o, j};
  };
  consider(0.0, at_zero);
  // JSD is non-increasing in the overlap.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40 && std::abs(best.measured_jsd - target_jsd) > tolerance / 5; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double j = measure(mid);
    consider(mid, j);
    if (j > target_jsd) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(best.measured_jsd - target_jsd) > tolerance) {
    std::ostringstream msg;
    msg << "JSD " << target_jsd << " unreachable for this template: achievable range ["
        << at_one << ", " << at_zero << "], closest " << best.measured_jsd << " at overlap "
        << best.overlap;
    throw Error(ErrorKind::kUnreachable, msg.str());
  }
  return best;
}

}  // namespace domaincraft
