#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "domaincraft/error.hpp"
#include "domaincraft/mixing.hpp"
#include "domaincraft/model/config.hpp"
#include "domaincraft/model/subword.hpp"
#include "domaincraft/model/transformer.hpp"
#include "domaincraft/strategy.hpp"

namespace domaincraft {

// Content ids of both sides of a sentence pair.
struct TokenizedPair {
  std::vector<int> source;
  std::vector<int> target;
};

std::vector<TokenizedPair> tokenize_pairs(const SubwordModel& subword,
                                          std::span<const SentencePair> pairs);
std::vector<TokenizedPair> tokenize_pairs(const SubwordModel& subword,
                                          const MixedDataset& dataset);

// [tag, ids..., EOS]
std::vector<int> frame(int tag, std::span<const int> ids);

// Training examples for one objective. Mono denoising yields two examples
// per pair (source side, then target side).
std::vector<Example> objective_examples(std::span<const TokenizedPair> pairs,
                                        Objective objective,
                                        const NoiseConfig& noise_cfg,
                                        std::uint64_t noise_seed);

// Loss of one batch of pairs under an objective; bitext+mono averages the
// bitext-denoise and mono-denoise losses. Adds gradients into `grad` when
// it is non-empty.
double objective_loss(const ModelParams& params,
                      std::span<const TokenizedPair> pairs, Objective objective,
                      const NoiseConfig& noise_cfg, std::uint64_t noise_seed,
                      std::span<double> grad);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  std::size_t batches = 0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct StageResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

// Raised when a batch produces a non-finite loss or update. Carries the
// parameters from before the failing update.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, ModelParams last_finite)
      : Error(ErrorKind::kNumeric, message), last_finite_(std::move(last_finite)) {}

  const ModelParams& last_finite() const { return last_finite_; }

 private:
  ModelParams last_finite_;
};

// Fixed-epoch Adam training. Batch order, noise and dropout all derive from
// cfg.seed. Optimizer state starts fresh for every stage.
StageResult train_stage(const ModelParams& init,
                        std::span<const TokenizedPair> data,
                        Objective objective, const TrainConfig& cfg,
                        const NoiseConfig& noise_cfg = {});

// Greedy decoding into the target language.
std::string translate(const ModelParams& params, const SubwordModel& subword,
                      std::string_view source, int max_len);
std::vector<std::string> translate_all(const ModelParams& params,
                                       const SubwordModel& subword,
                                       std::span<const std::string> sources,
                                       int max_len);

}  // namespace domaincraft
