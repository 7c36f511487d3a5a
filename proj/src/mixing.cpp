#include "domaincraft/mixing.hpp"

#include <algorithm>
#include <charconv>

#include "domaincraft/error.hpp"
#include "domaincraft/util/rng.hpp"

namespace domaincraft {

void DatasetSpec::validate() const {
  if (components.empty()) {
    throw Error(ErrorKind::kValidation, "dataset spec has no components");
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (components[i].size < 1) {
      throw Error(ErrorKind::kValidation,
                  "component " + components[i].domain.name() + " has size 0");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (components[i].domain == components[j].domain) {
        throw Error(ErrorKind::kValidation,
                    "domain " + components[i].domain.name() +
                        " listed twice in dataset spec");
      }
    }
  }
}

std::size_t DatasetSpec::total_size() const {
  std::size_t total = 0;
  for (const auto& c : components) total += c.size;
  return total;
}

bool DatasetSpec::contains(const DomainId& domain) const {
  return std::any_of(components.begin(), components.end(),
                     [&](const MixComponent& c) { return c.domain == domain; });
}

DatasetSpec DatasetSpec::parse(std::string_view text, std::uint64_t seed) {
  DatasetSpec spec;
  spec.seed = seed;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view entry = text.substr(start, comma - start);
    start = comma + 1;
    if (entry.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (f <= entry.size()) {
      const std::size_t colon = std::min(entry.find(':', f), entry.size());
      fields.push_back(entry.substr(f, colon - f));
      f = colon + 1;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(ErrorKind::kConfig,
                  "dataset entry must be domain:size[:upsample]: " +
                      std::string(entry));
    }
    std::size_t size = 0;
    const auto [ptr, ec] = std::from_chars(
        fields[1].data(), fields[1].data() + fields[1].size(), size);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) {
      throw Error(ErrorKind::kConfig,
                  "bad size in dataset entry: " + std::string(entry));
    }
    bool up = false;
    if (fields.size() == 3) {
      if (fields[2] != "upsample") {
        throw Error(ErrorKind::kConfig,
                    "third field must be 'upsample': " + std::string(entry));
      }
      up = true;
    }
    spec.components.push_back({DomainId(std::string(fields[0])), size, up});
  }
  spec.validate();
  return spec;
}

std::string DatasetSpec::str() const {
  std::string out;
  for (const auto& c : components) {
    if (!out.empty()) out += ',';
    out += c.domain.name() + ':' + std::to_string(c.size);
    if (c.upsample) out += ":upsample";
  }
  return out;
}

std::size_t MixedDataset::count(const DomainId& domain) const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(),
                    [&](const MixedPair& p) { return p.origin == domain; }));
}

ParallelCorpus upsample(const ParallelCorpus& corpus, std::size_t target,
                        std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (target < n) {
    throw Error(ErrorKind::kSize,
                "upsample target " + std::to_string(target) +
                    " is below corpus size " + std::to_string(n) +
                    "; use sample instead");
  }
  const std::size_t copies = target / n;
  const std::size_t remainder = target % n;
  std::vector<SentencePair> pairs;
  pairs.reserve(target);
  for (std::size_t c = 0; c < copies; ++c) {
    pairs.insert(pairs.end(), corpus.pairs().begin(), corpus.pairs().end());
  }
  if (remainder > 0) {
    const auto extra = sample(corpus, remainder, derive_seed(seed, "remainder"));
    pairs.insert(pairs.end(), extra.pairs().begin(), extra.pairs().end());
  }
  Rng rng(derive_seed(seed, "upsample-shuffle"));
  rng.shuffle(pairs);
  return ParallelCorpus(corpus.domain(), corpus.lang(), corpus.split(),
                        std::move(pairs));
}

MixedDataset mix(std::span<const ParallelCorpus> corpora,
                 const DatasetSpec& spec) {
  spec.validate();
  MixedDataset out;
  out.spec = spec;
  out.pairs.reserve(spec.total_size());
  for (const auto& component : spec.components) {
    const auto it = std::find_if(
        corpora.begin(), corpora.end(),
        [&](const ParallelCorpus& c) { return c.domain() == component.domain; });
    if (it == corpora.end()) {
      throw Error(ErrorKind::kUnknownDomain,
                  "no corpus loaded for domain " + component.domain.name());
    }
    const ParallelCorpus& corpus = *it;
    if (component.size > corpus.size() && !component.upsample) {
      throw Error(ErrorKind::kSize,
                  "domain " + component.domain.name() + " has " +
                      std::to_string(corpus.size()) + " pairs but " +
                      std::to_string(component.size) +
                      " were requested without upsampling");
    }
    const ParallelCorpus part =
        component.size > corpus.size()
            ? upsample(corpus, component.size, spec.seed)
            : sample(corpus, component.size, spec.seed);
    for (const auto& pair : part.pairs()) {
      out.pairs.push_back({pair, component.domain});
    }
  }
  Rng rng(derive_seed(spec.seed, "mix-shuffle"));
  rng.shuffle(out.pairs);
  return out;
}

}  // namespace domaincraft
