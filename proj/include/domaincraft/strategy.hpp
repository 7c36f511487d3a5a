#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "domaincraft/corpus.hpp"
#include "domaincraft/mixing.hpp"
#include "domaincraft/model/config.hpp"

namespace domaincraft {

enum class Objective { kNmt, kBitextDenoise, kMonoDenoise, kBitextPlusMonoDenoise };

enum class Strategy {
  kVanillaFT,
  kMultiDomainFT,
  kSingleDomainITTL,
  kMultiDomainITTL,
  kPretrainBitext,
  kPretrainBitextMono,
};

enum class Mode { kInDomain, kOutDomain };

std::string_view to_string(Objective objective);
std::string_view to_string(Strategy strategy);
std::string_view to_string(Mode mode);
Objective parse_objective(std::string_view text);
Strategy parse_strategy(std::string_view text);
Mode parse_mode(std::string_view text);

// Relative training cost, used to break ties in favour of cheaper strategies.
int compute_rank(Strategy strategy);

struct Stage {
  DatasetSpec data;
  Objective objective = Objective::kNmt;
  std::optional<TrainConfig> train;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct TestSpec {
  DomainId domain{"target"};
  Split split = Split::kTest;

  friend bool operator==(const TestSpec&, const TestSpec&) = default;
};

struct Schedule {
  std::string id;
  Strategy strategy = Strategy::kVanillaFT;
  Mode mode = Mode::kInDomain;
  std::vector<Stage> stages;
  TestSpec test;
  std::optional<LangPair> lang;
  std::size_t im_size = 0;  // 0 when the strategy has no auxiliary data
  std::size_t fi_size = 0;

  // Throws kValidation when the stage list contradicts the mode.
  void validate() const;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct DomainSize {
  DomainId domain{"target"};
  std::size_t available = 0;  // 0 = unknown, skip the size check
};

struct ScheduleRequest {
  Strategy strategy = Strategy::kVanillaFT;
  Mode mode = Mode::kInDomain;
  // Every domain with training data for the language pair.
  std::vector<DomainSize> domains;
  // Final-stage (target) domain.
  DomainId final_domain{"target"};
  // Out-domain test domain; in-domain runs test on the final domain.
  std::optional<DomainId> test_domain;
  // Intermediate domain(s) for single-domain ITTL and pre-training. Empty
  // means every auxiliary domain.
  std::vector<DomainId> intermediate;
  std::size_t im_size = 1000;
  std::size_t fi_size = 1000;
  std::uint64_t seed = 222;
  bool allow_upsample = false;
  std::optional<LangPair> lang;
};

Schedule build_schedule(const ScheduleRequest& request);

struct GridRequest {
  std::vector<std::size_t> im_sizes;
  std::vector<std::size_t> fi_sizes;
  std::vector<Strategy> strategies;
  std::vector<Mode> modes;
  std::vector<DomainSize> domains;
  // (intermediate, final) pairs; multi-domain strategies ignore the first.
  std::vector<std::pair<DomainId, DomainId>> domain_pairs;
  std::optional<DomainId> out_test_domain;
  std::uint64_t seed = 222;
  std::optional<LangPair> lang;
};

// Cross product of sizes x strategies x domain pairs x modes, de-duplicated
// by schedule id (vanilla FT has no intermediate size).
std::vector<Schedule> enumerate_grid(const GridRequest& grid);

}  // namespace domaincraft
