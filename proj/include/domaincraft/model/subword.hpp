#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "domaincraft/corpus.hpp"

namespace domaincraft {

// Byte-pair-encoding model over Unicode code points. Words are marked with a
// leading U+2581 the way SentencePiece does, so decoding is lossless for
// whitespace-normalized text over the training alphabet.
class SubwordModel {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kMask = 4;
  static constexpr int kSourceTag = 5;
  static constexpr int kTargetTag = 6;
  static constexpr int kNumSpecials = 7;

  SubwordModel(std::vector<std::string> alphabet,
               std::vector<std::pair<std::string, std::string>> merges);

  int vocab_size() const { return static_cast<int>(pieces_.size()); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  // Content ids only; framing (tags, BOS/EOS) is added by the caller.
  std::vector<int> encode(std::string_view text) const;
  std::vector<std::string> encode_pieces(std::string_view text) const;
  // Special ids are skipped, except UNK which renders as U+2047.
  std::string decode(std::span<const int> ids) const;

  std::string serialize() const;
  static SubwordModel deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static SubwordModel load(const std::filesystem::path& path);

 private:
  std::vector<std::string> word_pieces(std::string_view word) const;

  std::vector<std::string> alphabet_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> piece_ids_;
  std::unordered_map<std::string, int> merge_rank_;  // "a b" -> rank
};

// Learns merges over both sides of every corpus until the vocabulary
// (specials + alphabet + merges) reaches vocab_size or no pair occurs twice.
SubwordModel train_bpe(std::span<const ParallelCorpus> corpora, int vocab_size);

}  // namespace domaincraft
