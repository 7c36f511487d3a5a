#include "domaincraft/eval.hpp"

#include <cmath>
#include <map>

#include "domaincraft/error.hpp"
#include "domaincraft/model/train.hpp"

namespace domaincraft {

std::string_view to_string(BleuTokenizer tokenizer) {
  return tokenizer == BleuTokenizer::kWord ? "word" : "subword";
}

BleuTokenizer parse_bleu_tokenizer(std::string_view text) {
  if (text == "word") return BleuTokenizer::kWord;
  if (text == "subword") return BleuTokenizer::kSubword;
  throw Error(ErrorKind::kConfig, "unknown BLEU tokenizer '" + std::string(text) + "'");
}

std::string_view metric_name(BleuTokenizer tokenizer) {
  return tokenizer == BleuTokenizer::kWord ? "bleu" : "spbleu";
}

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngrams(const std::vector<std::string>& tokens, int n) {
  Counts c;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
    ++c[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                 tokens.begin() + static_cast<std::ptrdiff_t>(i + un))];
  }
  return c;
}

}  // namespace

BleuStats bleu_stats(std::span<const std::vector<std::string>> hypotheses,
                     std::span<const std::vector<std::string>> references, int max_n) {
  if (hypotheses.size() != references.size()) {
    throw Error(ErrorKind::kAlignment,
                "BLEU needs one reference per hypothesis (" + std::to_string(hypotheses.size()) +
                    " vs " + std::to_string(references.size()) + ")");
  }
  if (hypotheses.empty()) throw Error(ErrorKind::kSize, "BLEU needs at least one sentence");
  if (max_n < 1) throw Error(ErrorKind::kConfig, "BLEU max_n must be >= 1");
  BleuStats s;
  s.matches.assign(static_cast<std::size_t>(max_n), 0);
  s.totals.assign(static_cast<std::size_t>(max_n), 0);
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const auto& h = hypotheses[k];
    const auto& r = references[k];
    s.hyp_len += h.size();
    s.ref_len += r.size();
    for (int n = 1; n <= max_n; ++n) {
      const auto hc = ngrams(h, n);
      const auto rc = ngrams(r, n);
      auto& m = s.matches[static_cast<std::size_t>(n - 1)];
      for (const auto& [gram, count] : hc) {
        const auto it = rc.find(gram);
        if (it != rc.end()) m += std::min(count, it->second);
      }
      if (h.size() >= static_cast<std::size_t>(n)) {
        s.totals[static_cast<std::size_t>(n - 1)] += h.size() - static_cast<std::size_t>(n) + 1;
      }
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < s.matches.size(); ++n) {
    if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double c = static_cast<double>(s.hyp_len);
  const double r = static_cast<double>(s.ref_len);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(s.matches.size()));
}

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            BleuTokenizer tokenizer, const SubwordModel* subword, int max_n) {
  if (tokenizer == BleuTokenizer::kSubword && subword == nullptr) {
    throw Error(ErrorKind::kConfig, "subword BLEU needs a subword model");
  }
  const auto tok = [&](const std::string& s) {
    return tokenizer == BleuTokenizer::kWord ? split_words(s) : subword->encode_pieces(s);
  };
  std::vector<std::vector<std::string>> h, r;
  for (const auto& s : hypotheses) h.push_back(tok(s));
  for (const auto& s : references) r.push_back(tok(s));
  return bleu_from_stats(bleu_stats(h, r, max_n));
}

std::string bleu_signature(BleuTokenizer tokenizer, int max_n) {
  return "nrefs:1|tok:" + std::string(to_string(tokenizer)) + "|max_n:" + std::to_string(max_n) +
         "|smooth:none|version:1";
}

Evaluation evaluate(const ModelParams& params, const SubwordModel& subword,
                    const ParallelCorpus& test, BleuTokenizer tokenizer, std::string schedule_id,
                    int max_len) {
  if (test.size() == 0) throw Error(ErrorKind::kSize, "empty test corpus");
  std::vector<std::string> sources, refs;
  for (const auto& p : test.pairs()) {
    sources.push_back(p.source);
    refs.push_back(p.target);
  }
  const int limit = max_len > 0 ? max_len : params.config.max_len;
  Evaluation ev;
  ev.hypotheses = translate_all(params, subword, sources, limit);
  ev.result.schedule_id = std::move(schedule_id);
  ev.result.test_domain = test.domain();
  ev.result.metric = std::string(metric_name(tokenizer));
  ev.result.score = bleu(ev.hypotheses, refs, tokenizer, &subword);
  ev.result.hypotheses = ev.hypotheses.size();
  return ev;
}

}  // namespace domaincraft
