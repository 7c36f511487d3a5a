#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "domaincraft/model/train.hpp"
#include "domaincraft/strategy.hpp"
#include "domaincraft/workspace/workspace.hpp"

namespace domaincraft {

inline constexpr int kManifestVersion = 1;

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const NoiseConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);
NoiseConfig noise_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& j);

// Plan files: manifests/schedules/<id>.json.
void save_schedule(const Workspace& ws, const Schedule& schedule);
Schedule load_schedule(const Workspace& ws, const std::string& id);
bool has_schedule(const Workspace& ws, const std::string& id);

struct RunManifest {
  int version = kManifestVersion;
  std::string toolkit_version = kToolkitVersion;
  Schedule schedule;
  std::uint64_t data_seed = 222;
  std::uint64_t init_seed = 222;
  std::uint64_t train_seed = 222;
  ModelConfig model;  // vocab_size filled in
  TrainConfig train;
  NoiseConfig noise;
  BleuTokenizer tokenizer = BleuTokenizer::kSubword;
  SidePolicy side_policy = SidePolicy::kBoth;
  int subword_vocab = 2000;  // requested size; the model may stop short
  std::map<std::string, std::string> stopword_files;
  std::string settings_sha256;     // over the resolved settings
  std::string config_file_sha256;  // over domaincraft.conf; empty if absent
  std::map<std::string, std::string> corpus_digests;  // relative path -> sha256
  std::string subword_sha256;
  std::string started;
  std::string finished;
  // outputs
  std::string checkpoint;  // relative to the workspace
  std::string hypotheses;
  std::string metric;
  double score = 0.0;
  double jsd_final_to_test = 0.0;
  std::vector<std::vector<EpochLog>> stage_logs;

  nlohmann::json to_json() const;
  // Throws kManifest on a version mismatch or a malformed document.
  static RunManifest from_json(const nlohmann::json& j);
  static RunManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// sha256 over the canonical text of the settings that affect training.
std::string settings_digest(const ModelConfig& model, const TrainConfig& train,
                            const NoiseConfig& noise, BleuTokenizer tokenizer,
                            SidePolicy side_policy);

std::map<std::string, std::string> corpus_digests(const Workspace& ws);

std::string utc_timestamp();

}  // namespace domaincraft
