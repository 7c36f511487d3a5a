#include "domaincraft/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "domaincraft/model/noise.hpp"
#include "domaincraft/util/rng.hpp"

namespace domaincraft {

std::vector<TokenizedPair> tokenize_pairs(const SubwordModel& subword,
                                          std::span<const SentencePair> pairs) {
  std::vector<TokenizedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({subword.encode(p.source), subword.encode(p.target)});
  return out;
}

std::vector<TokenizedPair> tokenize_pairs(const SubwordModel& subword,
                                          const MixedDataset& dataset) {
  std::vector<TokenizedPair> out;
  out.reserve(dataset.size());
  for (const auto& p : dataset.pairs) {
    out.push_back({subword.encode(p.pair.source), subword.encode(p.pair.target)});
  }
  return out;
}

std::vector<int> frame(int tag, std::span<const int> ids) {
  std::vector<int> out;
  out.reserve(ids.size() + 2);
  out.push_back(tag);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(SubwordModel::kEos);
  return out;
}

std::vector<Example> objective_examples(std::span<const TokenizedPair> pairs,
                                        Objective objective,
                                        const NoiseConfig& noise_cfg,
                                        std::uint64_t noise_seed) {
  constexpr int kSrc = SubwordModel::kSourceTag;
  constexpr int kTgt = SubwordModel::kTargetTag;
  const auto noised = [&](std::span<const int> ids, std::uint64_t index) {
    return noise(ids, noise_cfg, derive_seed(noise_seed, index), SubwordModel::kMask);
  };
  std::vector<Example> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    switch (objective) {
      case Objective::kNmt:
        out.push_back({frame(kSrc, p.source), kTgt, p.target});
        break;
      case Objective::kBitextDenoise:
        out.push_back({frame(kSrc, noised(p.source, 2 * i)), kTgt, p.target});
        break;
      case Objective::kMonoDenoise:
        out.push_back({frame(kSrc, noised(p.source, 2 * i)), kSrc, p.source});
        out.push_back({frame(kTgt, noised(p.target, 2 * i + 1)), kTgt, p.target});
        break;
      case Objective::kBitextPlusMonoDenoise:
        throw Error(ErrorKind::kValidation,
                    "bitext+mono-denoise alternates two example streams");
    }
  }
  return out;
}

namespace {

double batch_loss(const Seq2Seq& model, const ModelConfig& cfg,
                  std::span<const Example> examples, std::span<double> grad,
                  const DropoutRates& rates, Rng* rng) {
  return model.loss(make_batch(examples, cfg.max_len), grad, rates, rng);
}

}  // namespace

double objective_loss(const ModelParams& params, std::span<const TokenizedPair> pairs,
                      Objective objective, const NoiseConfig& noise_cfg,
                      std::uint64_t noise_seed, std::span<double> grad) {
  const Seq2Seq model(params);
  if (objective != Objective::kBitextPlusMonoDenoise) {
    const auto ex = objective_examples(pairs, objective, noise_cfg, noise_seed);
    return batch_loss(model, params.config, ex, grad, {}, nullptr);
  }
  const auto bitext =
      objective_examples(pairs, Objective::kBitextDenoise, noise_cfg, noise_seed);
  const auto mono = objective_examples(pairs, Objective::kMonoDenoise, noise_cfg,
                                       derive_seed(noise_seed, "mono"));
  std::vector<double> g1, g2;
  if (!grad.empty()) {
    g1.assign(grad.size(), 0.0);
    g2.assign(grad.size(), 0.0);
  }
  const double a = batch_loss(model, params.config, bitext, g1, {}, nullptr);
  const double b = batch_loss(model, params.config, mono, g2, {}, nullptr);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += 0.5 * (g1[i] + g2[i]);
  return 0.5 * (a + b);
}

namespace {

struct Adam {
  std::vector<double> m, v;
  long step = 0;

  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void update(std::vector<double>& p, std::span<const double> g, const TrainConfig& cfg) {
    ++step;
    double lr = cfg.learning_rate;
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
      lr *= static_cast<double>(step) / cfg.warmup_steps;
    }
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_epsilon);
    }
  }
};

std::vector<std::vector<Example>> chunk(std::vector<Example> examples,
                                        std::span<const std::size_t> order,
                                        std::size_t batch_size) {
  std::vector<std::vector<Example>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<Example> b;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      b.push_back(std::move(examples[order[i]]));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  return idx;
}

// Batches for one epoch, in training order.
std::vector<std::vector<Example>> epoch_batches(std::span<const TokenizedPair> data,
                                                Objective objective,
                                                const TrainConfig& cfg,
                                                const NoiseConfig& noise_cfg, int epoch) {
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::uint64_t epoch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
  const std::uint64_t noise_seed = derive_seed(epoch_seed, "noise");
  const auto order = shuffled(data.size(), derive_seed(epoch_seed, "order"));
  if (objective != Objective::kBitextPlusMonoDenoise) {
    auto ex = objective_examples(data, objective, noise_cfg, noise_seed);
    if (objective == Objective::kMonoDenoise) {
      // Keep the two sides of a pair in the same batch.
      std::vector<std::size_t> pair_order;
      for (const auto i : order) {
        pair_order.push_back(2 * i);
        pair_order.push_back(2 * i + 1);
      }
      return chunk(std::move(ex), pair_order, 2 * bs);
    }
    return chunk(std::move(ex), order, bs);
  }
  // Alternate a bitext-denoise batch with a mono-denoise batch over the
  // same pairs.
  auto bitext = chunk(objective_examples(data, Objective::kBitextDenoise, noise_cfg, noise_seed),
                      order, bs);
  std::vector<std::size_t> pair_order;
  for (const auto i : order) {
    pair_order.push_back(2 * i);
    pair_order.push_back(2 * i + 1);
  }
  auto mono = chunk(objective_examples(data, Objective::kMonoDenoise, noise_cfg,
                                       derive_seed(noise_seed, "mono")),
                    pair_order, 2 * bs);
  std::vector<std::vector<Example>> out;
  for (std::size_t i = 0; i < bitext.size(); ++i) {
    out.push_back(std::move(bitext[i]));
    out.push_back(std::move(mono[i]));
  }
  return out;
}

}  // namespace

StageResult train_stage(const ModelParams& init, std::span<const TokenizedPair> data,
                        Objective objective, const TrainConfig& cfg,
                        const NoiseConfig& noise_cfg) {
  cfg.validate();
  noise_cfg.validate();
  if (data.empty()) throw Error(ErrorKind::kSize, "training stage has no data");
  StageResult result{init, {}};
  ModelParams& params = result.params;
  const DropoutRates rates{cfg.dropout.value_or(params.config.dropout),
                           cfg.attention_dropout.value_or(params.config.attention_dropout)};
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  Adam adam(params.values.size());
  std::vector<double> grad(params.values.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = epoch_batches(data, objective, cfg, noise_cfg, epoch);
    double total = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      const std::string where =
          "epoch " + std::to_string(epoch) + " batch " + std::to_string(bi);
      try {
        loss = Seq2Seq(params).loss(make_batch(batches[bi], params.config.max_len), grad,
                                    rates, &dropout_rng);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        throw DivergenceError("non-finite loss at " + where, params);
      }
      double norm2 = 0.0;
      for (const double g : grad) norm2 += g * g;
      if (!std::isfinite(norm2)) throw DivergenceError("non-finite gradient at " + where, params);
      if (cfg.clip_norm > 0.0 && norm2 > cfg.clip_norm * cfg.clip_norm) {
        const double s = cfg.clip_norm / std::sqrt(norm2);
        for (double& g : grad) g *= s;
      }
      ModelParams before = params;
      adam.update(params.values, grad, cfg);
      if (!params.all_finite()) {
        throw DivergenceError("non-finite parameters after " + where, std::move(before));
      }
      total += loss;
    }
    result.log.push_back({epoch, total / static_cast<double>(batches.size()), batches.size()});
  }
  return result;
}

std::vector<std::string> translate_all(const ModelParams& params, const SubwordModel& subword,
                                       std::span<const std::string> sources, int max_len) {
  std::vector<std::vector<int>> inputs;
  inputs.reserve(sources.size());
  for (const auto& s : sources) inputs.push_back(frame(SubwordModel::kSourceTag, subword.encode(s)));
  // Decode in length order so batches carry little padding; outputs do not
  // depend on batch composition.
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inputs[a].size() < inputs[b].size();
  });
  std::vector<std::vector<int>> sorted;
  sorted.reserve(inputs.size());
  for (const auto i : order) sorted.push_back(inputs[i]);
  const auto decoded = Seq2Seq(params).greedy(sorted, SubwordModel::kTargetTag, max_len);
  std::vector<std::string> out(sources.size());
  for (std::size_t k = 0; k < order.size(); ++k) out[order[k]] = subword.decode(decoded[k]);
  return out;
}

std::string translate(const ModelParams& params, const SubwordModel& subword,
                      std::string_view source, int max_len) {
  const std::vector<std::string> one = {std::string(source)};
  return translate_all(params, subword, one, max_len).front();
}

}  // namespace domaincraft
