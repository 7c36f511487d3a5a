#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domaincraft/model/config.hpp"

namespace domaincraft {

class Rng;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
};

// Named tensors packed into one flat buffer, in a fixed order derived from
// the config. Gradients and optimizer moments share the same layout.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t total() const { return total_; }
  const TensorInfo& find(std::string_view name) const;

 private:
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

struct ModelParams {
  ModelConfig config;
  std::vector<double> values;

  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// One sequence-to-sequence example in token ids. The encoder input is used
// verbatim; the decoder sees [BOS, tag, output...] and predicts
// [output..., EOS].
struct Example {
  std::vector<int> encoder_input;
  int decoder_tag = 0;
  std::vector<int> output;
};

// Padded, framed batch. Labels of -1 are ignored by the loss.
struct Batch {
  int size = 0;
  int src_len = 0;
  int tgt_len = 0;
  std::vector<int> src;
  std::vector<int> src_lengths;
  std::vector<int> dec_in;
  std::vector<int> labels;
  std::size_t label_count = 0;
};

// Sequences longer than max_len are truncated (the encoder input keeps its
// final token, which is EOS for framed inputs).
Batch make_batch(std::span<const Example> examples, int max_len);

struct DropoutRates {
  double hidden = 0.0;
  double attention = 0.0;
};

class Seq2Seq {
 public:
  explicit Seq2Seq(const ModelParams& params);

  // Mean cross-entropy over labelled target positions. When `grad` is
  // non-empty the gradient is added into it. Dropout is applied only when
  // `rng` is non-null.
  double loss(const Batch& batch, std::span<double> grad,
              const DropoutRates& dropout = {}, Rng* rng = nullptr) const;

  // Teacher-forced logits, one row per labelled position (row-major,
  // label_count x vocab).
  std::vector<double> logits(const Batch& batch) const;

  // Greedy decoding from [BOS, tag] until EOS or max_len tokens. Output ids
  // exclude the framing and EOS.
  std::vector<std::vector<int>> greedy(
      std::span<const std::vector<int>> encoder_inputs, int tag,
      int max_len) const;

  // Logits of every decoding step for a forced output prefix, computed by
  // the incremental decoder (used to cross-check the batched path).
  std::vector<double> incremental_logits(const std::vector<int>& encoder_input,
                                         int tag,
                                         const std::vector<int>& forced) const;

 private:
  const ModelParams& params_;
  ParamLayout layout_;
};

}  // namespace domaincraft
