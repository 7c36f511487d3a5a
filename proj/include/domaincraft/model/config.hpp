#pragma once

#include <cstdint>
#include <optional>

namespace domaincraft {

// Encoder-decoder shape. `layers` applies to both stacks.
struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int width = 128;
  int ff_width = 256;
  int max_len = 128;
  double dropout = 0.3;
  double attention_dropout = 0.1;
  int vocab_size = 0;

  void validate() const;
  int head_width() const { return width / heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Fine-tuning hyperparameters. Defaults are the published fine-tuning
// settings (3 epochs, lr 3e-5, batch 32, seed 222).
struct TrainConfig {
  int epochs = 3;
  double learning_rate = 3e-5;
  int batch_size = 32;
  std::uint64_t seed = 222;
  std::optional<double> dropout;
  std::optional<double> attention_dropout;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;
  // Linear learning-rate warmup over this many updates; 0 disables it.
  int warmup_steps = 0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Span masking for the denoising objectives.
struct NoiseConfig {
  double mask_ratio = 0.35;
  double mean_span = 3.5;

  void validate() const;

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

}  // namespace domaincraft
