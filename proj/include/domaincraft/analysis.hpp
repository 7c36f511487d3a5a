#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domaincraft/corpus.hpp"
#include "domaincraft/strategy.hpp"

namespace domaincraft {

struct RunResult {
  std::string schedule_id;
  Strategy strategy = Strategy::kVanillaFT;
  Mode mode = Mode::kInDomain;
  std::size_t im_size = 0;
  std::size_t fi_size = 0;
  DomainId test_domain{"test"};
  std::string metric = "spbleu";
  double score = 0.0;
  double jsd_final_to_test = 0.0;
};

// Squared Pearson correlation. Constant ys give 0.
double r_squared(std::span<const double> xs, std::span<const double> ys);
double pearson(std::span<const double> xs, std::span<const double> ys);
// Pearson correlation of average ranks (ties share their mean rank).
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> average_ranks(std::span<const double> values);
// Population variance.
double variance(std::span<const double> scores);

struct RankedStrategy {
  Strategy strategy = Strategy::kVanillaFT;
  double score = 0.0;  // mean over the runs in the cell
  std::size_t runs = 0;
};

struct TableCell {
  std::size_t im_size = 0;
  std::size_t fi_size = 0;
  Mode mode = Mode::kInDomain;
  std::vector<RankedStrategy> ranking;  // best first
  // Set when the winner beats a cheaper runner-up by less than the margin.
  std::optional<Strategy> compute_limited_pick;
};

inline constexpr double kComputeMargin = 1.0;

// One cell per (im_size, fi_size, mode), ordered by mode, then im_size,
// then fi_size. Strategies within a cell are ranked by mean score; exact
// ties go to the cheaper strategy. Runs with im_size 0 join every cell of
// their mode and fi_size.
std::vector<TableCell> tabulate(std::span<const RunResult> results,
                                double margin = kComputeMargin);

enum class ComputeBudget { kLimited, kAmple };
std::string_view to_string(ComputeBudget budget);
ComputeBudget parse_compute_budget(std::string_view text);

struct RecommendRequest {
  std::size_t target_size = 0;
  std::vector<std::size_t> aux_sizes;
  Mode mode = Mode::kInDomain;
  // Divergence of each candidate final-stage domain to the test domain.
  std::map<DomainId, double> jsd_to_test;
  ComputeBudget budget = ComputeBudget::kLimited;
  std::size_t pretrain_threshold = 50000;
  std::size_t large_threshold = 25000;
};

struct Recommendation {
  Strategy strategy = Strategy::kVanillaFT;
  std::string rule;       // "R1".."R5"
  std::string rationale;  // the finding behind the rule
  std::string confidence;
  std::optional<DomainId> final_domain;
  bool pretraining_allowed = false;
  std::vector<std::string> warnings;
};

// Applies R1..R5 in order. R1 only gates continuous pre-training; the
// returned rule is the one that picked the strategy.
Recommendation recommend(const RecommendRequest& request);

}  // namespace domaincraft
