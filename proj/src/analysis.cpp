#include "domaincraft/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "domaincraft/error.hpp"

namespace domaincraft {
namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_pairs(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorKind::kValidation, "correlation needs equally long inputs");
  }
  if (xs.size() < 2) throw Error(ErrorKind::kValidation, "correlation needs at least 2 points");
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    throw Error(ErrorKind::kValidation, "correlation needs at least two distinct x values");
  }
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  check_pairs(xs, ys);
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double r_squared(std::span<const double> xs, std::span<const double> ys) {
  const double r = pearson(xs, ys);
  return r * r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  check_pairs(xs, ys);
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

double variance(std::span<const double> scores) {
  if (scores.size() < 2) throw Error(ErrorKind::kValidation, "variance needs at least 2 scores");
  const double m = mean(scores);
  double s = 0.0;
  for (const double x : scores) s += (x - m) * (x - m);
  return s / static_cast<double>(scores.size());
}

std::vector<TableCell> tabulate(std::span<const RunResult> results, double margin) {
  using Key = std::tuple<int, std::size_t, std::size_t>;
  std::map<Key, std::map<Strategy, std::pair<double, std::size_t>>> cells;
  // Runs without auxiliary data (im_size 0) are the baseline of every cell
  // sharing their mode and target size; alone they form an IM-0 cell.
  std::set<Key> with_aux;
  for (const auto& r : results) {
    if (r.im_size > 0) with_aux.insert({static_cast<int>(r.mode), r.im_size, r.fi_size});
  }
  for (const auto& r : results) {
    std::vector<Key> keys;
    if (r.im_size > 0) {
      keys.push_back({static_cast<int>(r.mode), r.im_size, r.fi_size});
    } else {
      for (const auto& k : with_aux) {
        if (std::get<0>(k) == static_cast<int>(r.mode) && std::get<2>(k) == r.fi_size) keys.push_back(k);
      }
      if (keys.empty()) keys.push_back({static_cast<int>(r.mode), 0, r.fi_size});
    }
    for (const auto& k : keys) {
      auto& acc = cells[k][r.strategy];
      acc.first += r.score;
      ++acc.second;
    }
  }
  std::vector<TableCell> out;
  for (const auto& [key, by_strategy] : cells) {
    TableCell cell;
    cell.mode = static_cast<Mode>(std::get<0>(key));
    cell.im_size = std::get<1>(key);
    cell.fi_size = std::get<2>(key);
    for (const auto& [strategy, acc] : by_strategy) {
      cell.ranking.push_back({strategy, acc.first / static_cast<double>(acc.second), acc.second});
    }
    std::sort(cell.ranking.begin(), cell.ranking.end(),
              [](const RankedStrategy& a, const RankedStrategy& b) {
                if (a.score != b.score) return a.score > b.score;
                return compute_rank(a.strategy) < compute_rank(b.strategy);
              });
    if (cell.ranking.size() >= 2) {
      const auto& best = cell.ranking[0];
      const auto& second = cell.ranking[1];
      if (compute_rank(second.strategy) < compute_rank(best.strategy) &&
          best.score - second.score < margin) {
        cell.compute_limited_pick = second.strategy;
      }
    }
    out.push_back(std::move(cell));
  }
  return out;
}

std::string_view to_string(ComputeBudget budget) {
  return budget == ComputeBudget::kLimited ? "limited" : "ample";
}

ComputeBudget parse_compute_budget(std::string_view text) {
  if (text == "limited") return ComputeBudget::kLimited;
  if (text == "ample") return ComputeBudget::kAmple;
  throw Error(ErrorKind::kConfig, "unknown compute budget: " + std::string(text));
}

Recommendation recommend(const RecommendRequest& req) {
  if (req.target_size == 0) throw Error(ErrorKind::kValidation, "target size must be > 0");
  for (const auto s : req.aux_sizes) {
    if (s == 0) throw Error(ErrorKind::kValidation, "auxiliary sizes must be > 0");
  }
  const std::size_t aux_total = std::accumulate(req.aux_sizes.begin(), req.aux_sizes.end(),
                                                std::size_t{0});
  Recommendation rec;
  // R1
  rec.pretraining_allowed = req.target_size + aux_total >= req.pretrain_threshold;
  if (!rec.pretraining_allowed) {
    rec.warnings.push_back("R1: total data below " + std::to_string(req.pretrain_threshold) +
                           " pairs, continuous pre-training excluded");
  }

  if (req.mode == Mode::kInDomain) {
    if (req.target_size >= req.large_threshold) {
      rec.strategy = Strategy::kVanillaFT;
      rec.rule = "R2";
      rec.rationale =
          "with a large in-domain target set no auxiliary-data technique significantly "
          "outperforms plain fine-tuning";
      rec.confidence = "high";
      return rec;
    }
    if (req.aux_sizes.empty()) {
      throw Error(ErrorKind::kValidation,
                  "a small in-domain target needs auxiliary domain sizes to choose a strategy");
    }
    if (aux_total >= req.large_threshold) {
      rec.strategy = Strategy::kMultiDomainITTL;
      rec.rule = "R3";
      rec.rationale =
          "with a small target and large auxiliary data, multi-domain ITTL performs better "
          "than vanilla and multi-domain fine-tuning";
      rec.confidence = "high";
      return rec;
    }
    rec.rule = "R4";
    if (req.budget == ComputeBudget::kAmple) {
      rec.strategy = Strategy::kMultiDomainITTL;
      rec.rationale =
          "with small target and auxiliary data, multi-domain ITTL scores best when compute "
          "allows the extra stage";
    } else {
      rec.strategy = Strategy::kMultiDomainFT;
      rec.rationale =
          "with small target and auxiliary data under limited compute, multi-domain "
          "fine-tuning comes within 1 point of multi-domain ITTL at lower cost";
    }
    rec.confidence = "medium";
    return rec;
  }

  // R5
  rec.rule = "R5";
  rec.strategy = req.budget == ComputeBudget::kLimited ? Strategy::kMultiDomainFT
                                                       : Strategy::kMultiDomainITTL;
  if (req.jsd_to_test.empty()) {
    rec.warnings.push_back(
        "R5 degraded: no divergence values given, final-stage domain left unchosen");
    rec.rationale =
        "out-of-domain testing; the final stage should use the domain closest to the test "
        "domain, which cannot be determined without divergence values";
    rec.confidence = "low";
    return rec;
  }
  auto best = req.jsd_to_test.begin();
  for (auto it = req.jsd_to_test.begin(); it != req.jsd_to_test.end(); ++it) {
    if (it->second < best->second) best = it;
  }
  rec.final_domain = best->first;
  rec.rationale =
      "out-of-domain testing; using the auxiliary domain closest to the test domain (lowest "
      "JSD) in the final stage gives the largest gains";
  rec.rationale += req.budget == ComputeBudget::kLimited
                       ? ", and multi-domain fine-tuning is less sensitive to domain divergence "
                         "than multi-domain ITTL"
                       : ", and multi-domain ITTL scores higher when compute allows the extra "
                         "stage";
  rec.confidence = "medium";
  return rec;
}

}  // namespace domaincraft
