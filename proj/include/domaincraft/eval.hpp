#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domaincraft/corpus.hpp"
#include "domaincraft/model/subword.hpp"
#include "domaincraft/model/transformer.hpp"

namespace domaincraft {

enum class BleuTokenizer { kWord, kSubword };

std::string_view to_string(BleuTokenizer tokenizer);
BleuTokenizer parse_bleu_tokenizer(std::string_view text);
// Metric name recorded with every score: "bleu" or "spbleu".
std::string_view metric_name(BleuTokenizer tokenizer);

struct BleuStats {
  std::vector<std::size_t> matches;  // per n, clipped
  std::vector<std::size_t> totals;   // per n
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

BleuStats bleu_stats(std::span<const std::vector<std::string>> hypotheses,
                     std::span<const std::vector<std::string>> references,
                     int max_n = 4);
double bleu_from_stats(const BleuStats& stats);

// Corpus BLEU on a 0-100 scale, unsmoothed. Subword mode needs a model.
double bleu(std::span<const std::string> hypotheses,
            std::span<const std::string> references, BleuTokenizer tokenizer,
            const SubwordModel* subword = nullptr, int max_n = 4);

// Identifies the scoring configuration, e.g.
// "nrefs:1|tok:subword|max_n:4|smooth:none|version:1".
std::string bleu_signature(BleuTokenizer tokenizer, int max_n = 4);

struct EvalResult {
  std::string schedule_id;
  DomainId test_domain{"test"};
  std::string metric;
  double score = 0.0;
  std::size_t hypotheses = 0;
};

struct Evaluation {
  EvalResult result;
  std::vector<std::string> hypotheses;
};

Evaluation evaluate(const ModelParams& params, const SubwordModel& subword,
                    const ParallelCorpus& test, BleuTokenizer tokenizer,
                    std::string schedule_id = {}, int max_len = 0);

}  // namespace domaincraft
