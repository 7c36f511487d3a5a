#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "domaincraft/corpus.hpp"
#include "domaincraft/divergence.hpp"
#include "domaincraft/eval.hpp"
#include "domaincraft/model/config.hpp"
#include "domaincraft/workspace/config.hpp"

namespace domaincraft {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr const char* kWorkspaceEnv = "DOMAINCRAFT_WORKSPACE";

struct CorpusFiles {
  LangPair lang;
  DomainId domain;
  Split split;
  std::vector<std::filesystem::path> files;  // src+tgt, or a single tsv
};

// Resolved settings: built-in defaults, overridden by the workspace config,
// overridden by command-line values (applied to the config beforehand).
struct Settings {
  ModelConfig model;
  TrainConfig train;
  NoiseConfig noise;
  int subword_vocab = 2000;
  BleuTokenizer tokenizer = BleuTokenizer::kSubword;
  SidePolicy side_policy = SidePolicy::kBoth;
  std::uint64_t seed = 222;  // data sampling / mixing
  std::uint64_t init_seed = 222;
  std::optional<LangPair> lang;
  StopwordTable stopwords;
  std::map<std::string, std::string> stopword_files;

  // `seed_override` replaces every seed (the --seed flag).
  static Settings resolve(const KeyValueConfig& config, const std::filesystem::path& root,
                          std::optional<std::uint64_t> seed_override = std::nullopt);
};

class Workspace {
 public:
  // --workspace flag, else $DOMAINCRAFT_WORKSPACE, else the current directory.
  static std::filesystem::path locate(const std::optional<std::string>& flag);
  static Workspace open(const std::filesystem::path& root);
  static Workspace create(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path config_path() const { return root_ / "domaincraft.conf"; }
  std::filesystem::path corpora_dir() const { return root_ / "corpora"; }
  std::filesystem::path schedules_dir() const { return root_ / "manifests" / "schedules"; }
  std::filesystem::path runs_dir() const { return root_ / "runs"; }
  std::filesystem::path run_dir(const std::string& schedule_id) const {
    return runs_dir() / schedule_id;
  }
  std::filesystem::path results_path() const { return root_ / "results.csv"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }
  std::filesystem::path subword_path() const { return root_ / "subword.model"; }

  KeyValueConfig config() const;

  std::vector<CorpusFiles> list_corpora() const;
  std::vector<ParallelCorpus> load_corpora(const std::optional<LangPair>& lang = std::nullopt,
                                           const std::optional<Split>& split = std::nullopt) const;
  void write_corpus(const ParallelCorpus& corpus) const;
  // Digest over the listed files' names and contents.
  std::string corpora_digest(const std::vector<CorpusFiles>& files) const;

  // The language pair to work in: the configured one, else the only one
  // present.
  LangPair active_lang(const Settings& settings) const;

  // Trains the subword model over every train split when missing.
  SubwordModel subword(const Settings& settings) const;
  void invalidate_subword() const;

 private:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
};

}  // namespace domaincraft
