#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "domaincraft/analysis.hpp"
#include "domaincraft/corpus.hpp"
#include "domaincraft/divergence.hpp"
#include "domaincraft/eval.hpp"
#include "domaincraft/model/config.hpp"
#include "domaincraft/model/subword.hpp"
#include "domaincraft/model/train.hpp"
#include "domaincraft/strategy.hpp"

namespace domaincraft {

// Everything a schedule needs besides the schedule itself.
struct ExperimentContext {
  std::vector<ParallelCorpus> train;  // one train-split corpus per domain
  std::vector<ParallelCorpus> test;   // test-split corpora
  SubwordModel subword;
  ModelConfig model;  // vocab_size is taken from the subword model
  TrainConfig train_cfg;
  NoiseConfig noise;
  std::uint64_t init_seed = 222;
  BleuTokenizer tokenizer = BleuTokenizer::kSubword;
  SidePolicy side_policy = SidePolicy::kBoth;
  StopwordTable stopwords;
};

struct StageOutput {
  ModelParams params;
  std::vector<EpochLog> log;
  std::string key;
};

struct RunOutcome {
  std::string schedule_id;
  std::vector<std::shared_ptr<const StageOutput>> stages;
  Evaluation evaluation;
  double jsd_final_to_test = 0.0;

  const ModelParams& params() const { return stages.back()->params; }
  RunResult result(const Schedule& schedule) const;
};

// Canonical text of a training configuration, used in cache keys and
// manifests.
std::string describe(const TrainConfig& cfg);
std::string describe(const ModelConfig& cfg);
std::string describe(const NoiseConfig& cfg);

// Executes schedules. Trained stage prefixes are cached: two schedules
// sharing their first k stages (same data, objective and configs) reuse the
// same parameters, which is exact because training is deterministic.
class Runner {
 public:
  explicit Runner(ExperimentContext context);

  const ExperimentContext& context() const { return ctx_; }

  // Trains every stage; `on_stage` sees each stage output (cached or not).
  std::vector<std::shared_ptr<const StageOutput>> train(
      const Schedule& schedule,
      const std::function<void(std::size_t, const StageOutput&, bool cached)>& on_stage = {});

  RunOutcome run(const Schedule& schedule,
                 const std::function<void(std::size_t, const StageOutput&, bool cached)>& on_stage = {});

  const ParallelCorpus& test_corpus(const DomainId& domain) const;
  const ModelParams& initial_params() const { return init_; }

 private:
  ExperimentContext ctx_;
  ModelParams init_;
  std::map<std::string, std::shared_ptr<const StageOutput>> cache_;
};

// Stage data as a corpus labelled with the given domain, for JSD.
ParallelCorpus dataset_corpus(const MixedDataset& data, const DomainId& label,
                              const LangPair& lang);

}  // namespace domaincraft
