#include "domaincraft/model/config.hpp"

#include <string>

#include "domaincraft/error.hpp"

namespace domaincraft {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kConfig, what);
}

bool is_rate(double r) { return r >= 0.0 && r < 1.0; }

}  // namespace

void ModelConfig::validate() const {
  require(layers >= 1, "model.layers must be >= 1");
  require(heads >= 1, "model.heads must be >= 1");
  require(width >= 1 && width % heads == 0,
          "model.width must be a positive multiple of model.heads");
  require(ff_width >= 1, "model.ff_width must be >= 1");
  require(max_len >= 4, "model.max_len must be >= 4");
  require(is_rate(dropout), "model.dropout must lie in [0, 1)");
  require(is_rate(attention_dropout),
          "model.attention_dropout must lie in [0, 1)");
  require(vocab_size >= 8, "model vocabulary is too small");
}

void TrainConfig::validate() const {
  require(epochs >= 1, "train.epochs must be >= 1");
  require(learning_rate >= 0.0, "train.lr must be >= 0");
  require(batch_size >= 1, "train.batch_size must be >= 1");
  require(!dropout || is_rate(*dropout), "train.dropout must lie in [0, 1)");
  require(!attention_dropout || is_rate(*attention_dropout),
          "train.attention_dropout must lie in [0, 1)");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 &&
              adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(adam_epsilon > 0.0, "adam epsilon must be > 0");
  require(clip_norm >= 0.0, "train.clip_norm must be >= 0");
  require(warmup_steps >= 0, "train.warmup_steps must be >= 0");
}

void NoiseConfig::validate() const {
  require(mask_ratio >= 0.0 && mask_ratio <= 1.0,
          "noise.mask_ratio must lie in [0, 1]");
  require(mean_span > 0.0, "noise.mean_span must be > 0");
}

}  // namespace domaincraft
