#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "domaincraft/corpus.hpp"

namespace domaincraft {

struct SynthDomain {
  DomainId domain{"synthetic"};
  int vocab_size = 200;
  // Probability that a vocabulary rank holds the shared core word rather
  // than a domain-private one.
  double overlap = 1.0;
};

struct SynthSpec {
  std::vector<SynthDomain> domains;
  LangPair lang{"xx", "yy"};
  int min_len = 4;
  int max_len = 10;
  std::size_t train_size = 5000;
  std::size_t dev_size = 0;
  std::size_t test_size = 500;
  double zipf_exponent = 1.0;
  // Flattens the head so no single rank carries much mass; this keeps JSD
  // a fine-grained function of the overlap.
  double zipf_offset = 10.0;
  std::uint64_t translation_seed = 222;
  std::uint64_t generation_seed = 222;

  void validate() const;
};

// Sentences are Zipf-Mandelbrot draws over each domain's vocabulary ranks,
// p(r) ~ 1 / (r + 1 + offset)^exponent. Rank r holds the shared core word
// or a domain-private word per an independent per-domain coin with bias
// `overlap`, so the vocabulary two domains share is the set of ranks where
// both coins came up core. The target side maps every word
// through a fixed bijection and swaps adjacent word pairs.
// Returns train, [dev,] test corpora per domain, in spec order.
std::vector<ParallelCorpus> generate(const SynthSpec& spec);

// The ground-truth translation of a source sentence of `spec`'s language.
std::string synth_translate(const SynthSpec& spec, const std::string& source);

struct Calibration {
  double overlap = 0.0;
  double measured_jsd = 0.0;
};

// Searches the overlap of the template's first domain so that its training
// split lies `target_jsd` (within `tolerance`) from a fully shared domain of
// the same shape. Throws kUnreachable with the achievable range otherwise.
Calibration calibrate_overlap(double target_jsd, const SynthSpec& spec_template,
                              double tolerance = 0.05);

}  // namespace domaincraft
