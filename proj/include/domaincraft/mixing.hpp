#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domaincraft/corpus.hpp"

namespace domaincraft {

struct MixComponent {
  DomainId domain;
  std::size_t size = 0;
  bool upsample = false;

  friend bool operator==(const MixComponent&, const MixComponent&) = default;
};

struct DatasetSpec {
  std::vector<MixComponent> components;
  std::uint64_t seed = 222;

  void validate() const;
  std::size_t total_size() const;
  bool contains(const DomainId& domain) const;

  // "cc:1000,bible:1000:upsample"
  static DatasetSpec parse(std::string_view text, std::uint64_t seed);
  std::string str() const;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct MixedPair {
  SentencePair pair;
  DomainId origin;
};

struct MixedDataset {
  std::vector<MixedPair> pairs;
  DatasetSpec spec;

  std::size_t size() const { return pairs.size(); }
  std::size_t count(const DomainId& domain) const;
};

// Replicates every pair floor(target/n) times, adds a seeded sample of
// target mod n further pairs, and shuffles.
ParallelCorpus upsample(const ParallelCorpus& corpus, std::size_t target,
                        std::uint64_t seed);

// Samples (or upsamples) each component with the spec seed, concatenates in
// component order and applies one seeded global shuffle.
MixedDataset mix(std::span<const ParallelCorpus> corpora,
                 const DatasetSpec& spec);

}  // namespace domaincraft
