#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "domaincraft/analysis.hpp"

namespace domaincraft {

inline constexpr const char* kResultsHeader =
    "schedule_id,strategy,mode,test_domain,im_size,fi_size,metric,score";

struct ResultRow {
  std::string schedule_id;
  std::string strategy;
  std::string mode;
  std::string test_domain;
  std::size_t im_size = 0;
  std::size_t fi_size = 0;
  std::string metric;
  std::string score;  // as written, fixed 4 decimals

  std::string line() const;
  static ResultRow parse(const std::string& line);
  double score_value() const { return std::stod(score); }

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

ResultRow to_row(const RunResult& result);

// Append-only CSV. Appends take an exclusive flock on the file.
class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path path) : path_(std::move(path)) {}

  std::vector<ResultRow> read() const;
  // Identical row already present: no-op, returns false. Same
  // (schedule_id, metric) with a different row: kResults.
  bool append(const ResultRow& row) const;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace domaincraft
