#include <doctest.h>

#include <cmath>

#include "domaincraft/analysis.hpp"
#include "domaincraft/error.hpp"
#include "domaincraft/util/rng.hpp"

using namespace domaincraft;

namespace {

double oracle_r2(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = static_cast<long double>(x.size()), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double cov = n * sxy - sx * sy;
  return static_cast<double>(cov * cov / ((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

RunResult run(Strategy s, double score, std::size_t im = 25000, std::size_t fi = 1000,
              Mode mode = Mode::kInDomain) {
  RunResult r;
  r.strategy = s;
  r.score = score;
  r.im_size = im;
  r.fi_size = fi;
  r.mode = mode;
  return r;
}

}  // namespace

TEST_CASE("r_squared") {
  CHECK(r_squared(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 1}) == doctest::Approx(0.75));
  CHECK(r_squared(std::vector<double>{0, 1, 2, 3}, std::vector<double>{5, 3, 1, -1}) == doctest::Approx(1.0));
  CHECK(r_squared(std::vector<double>{0, 1, 2}, std::vector<double>{4, 4, 4}) == 0.0);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1, 2}, std::vector<double>{1}), Error);

  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x, y, xs, ys;
    const std::size_t n = 3 + rng.uniform_index(20);
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(rng.uniform01());
      y.push_back(50 * x.back() + 20 * rng.uniform01());
    }
    const double r2 = r_squared(x, y);
    CHECK(r2 >= 0.0);
    CHECK(r2 <= 1.0);
    CHECK(std::abs(r2 - oracle_r2(x, y)) < 1e-9);
    const double a = 0.5 + 3 * rng.uniform01(), b = rng.uniform01() * 10 - 5;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(a * x[i] + b);
      ys.push_back(-a * y[i] + 2 * b);
    }
    CHECK(std::abs(r_squared(xs, y) - r2) < 1e-9);
    CHECK(std::abs(r_squared(x, ys) - r2) < 1e-9);
  }
}

TEST_CASE("spearman uses average ranks") {
  CHECK(average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 8, 5, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 4, 9}) == doctest::Approx(1.0));
}

TEST_CASE("variance") {
  CHECK(variance(std::vector<double>{7, 7, 7}) == 0.0);
  CHECK(variance(std::vector<double>{0, 10}) == 25.0);
  CHECK_THROWS_AS(variance(std::vector<double>{1}), Error);
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v;
    for (std::size_t i = 2 + rng.uniform_index(30); i > 0; --i) v.push_back(100 * rng.uniform01());
    long double m = 0;
    for (const double x : v) m += x;
    m /= v.size();
    long double s = 0;
    for (const double x : v) s += (x - m) * (x - m);
    CHECK(std::abs(variance(v) - static_cast<double>(s / v.size())) < 1e-12 * std::max(1.0, variance(v)));
  }
}

TEST_CASE("tabulate") {
  SUBCASE("best and second") {
    const std::vector<RunResult> rs{run(Strategy::kMultiDomainITTL, 20.0), run(Strategy::kMultiDomainFT, 19.5),
                                    run(Strategy::kVanillaFT, 15.0, 0)};
    const auto cells = tabulate(rs);
    REQUIRE(cells.size() == 1);
    REQUIRE(cells[0].ranking.size() == 3);
    CHECK(cells[0].ranking[0].strategy == Strategy::kMultiDomainITTL);
    CHECK(cells[0].ranking[1].strategy == Strategy::kMultiDomainFT);
    CHECK(cells[0].ranking[2].strategy == Strategy::kVanillaFT);
    // 0.5 apart: the cheaper runner-up is flagged
    REQUIRE(cells[0].compute_limited_pick.has_value());
    CHECK(*cells[0].compute_limited_pick == Strategy::kMultiDomainFT);
  }
  SUBCASE("exact tie goes to the cheaper strategy") {
    const std::vector<RunResult> rs{run(Strategy::kMultiDomainITTL, 20.0), run(Strategy::kMultiDomainFT, 20.0)};
    const auto cells = tabulate(rs);
    CHECK(cells[0].ranking[0].strategy == Strategy::kMultiDomainFT);
    CHECK_FALSE(cells[0].compute_limited_pick.has_value());
  }
  SUBCASE("clear winner is not flagged") {
    const std::vector<RunResult> rs{run(Strategy::kMultiDomainITTL, 22.0), run(Strategy::kMultiDomainFT, 20.0)};
    CHECK_FALSE(tabulate(rs)[0].compute_limited_pick.has_value());
  }
  SUBCASE("cells, ordering and averaging") {
    const std::vector<RunResult> rs{
        run(Strategy::kMultiDomainFT, 10.0, 25000, 1000, Mode::kOutDomain),
        run(Strategy::kMultiDomainFT, 30.0, 1000, 1000),
        run(Strategy::kMultiDomainFT, 20.0, 1000, 1000),
        run(Strategy::kMultiDomainITTL, 24.0, 1000, 1000),
        run(Strategy::kVanillaFT, 5.0, 0, 1000),
        run(Strategy::kVanillaFT, 7.0, 0, 25000),
    };
    const auto cells = tabulate(rs);
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].mode == Mode::kInDomain);
    CHECK(cells[0].im_size == 0);
    CHECK(cells[0].fi_size == 25000);
    CHECK(cells[1].im_size == 1000);
    CHECK(cells[2].mode == Mode::kOutDomain);
    // the baseline joins the 1k/1k cell
    REQUIRE(cells[1].ranking.size() == 3);
    CHECK(cells[1].ranking[0].strategy == Strategy::kMultiDomainFT);
    CHECK(cells[1].ranking[0].score == 25.0);
    CHECK(cells[1].ranking[0].runs == 2);
    CHECK(cells[1].ranking[2].strategy == Strategy::kVanillaFT);
    // input order does not matter
    const std::vector<RunResult> rev(rs.rbegin(), rs.rend());
    const auto again = tabulate(rev);
    REQUIRE(again.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      REQUIRE(again[i].ranking.size() == cells[i].ranking.size());
      for (std::size_t k = 0; k < cells[i].ranking.size(); ++k) {
        CHECK(again[i].ranking[k].strategy == cells[i].ranking[k].strategy);
      }
    }
  }
}

TEST_CASE("recommend rule table") {
  struct Row {
    std::size_t target;
    std::vector<std::size_t> aux;
    Mode mode;
    std::map<DomainId, double> jsd;
    ComputeBudget budget;
    Strategy want;
    const char* rule;
    const char* final_domain;
  };
  const std::vector<Row> rows{
      {1000, {25000}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kMultiDomainITTL, "R3", nullptr},
      {1000, {25000}, Mode::kInDomain, {}, ComputeBudget::kAmple, Strategy::kMultiDomainITTL, "R3", nullptr},
      {1000, {10000, 15000}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kMultiDomainITTL, "R3", nullptr},
      {25000, {}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kVanillaFT, "R2", nullptr},
      {25000, {25000}, Mode::kInDomain, {}, ComputeBudget::kAmple, Strategy::kVanillaFT, "R2", nullptr},
      {1000, {1000}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kMultiDomainFT, "R4", nullptr},
      {1000, {1000, 1000}, Mode::kInDomain, {}, ComputeBudget::kAmple, Strategy::kMultiDomainITTL, "R4", nullptr},
      {1000, {1000}, Mode::kOutDomain, {{DomainId("bible"), 0.47}, {DomainId("pmi"), 0.33}},
       ComputeBudget::kLimited, Strategy::kMultiDomainFT, "R5", "pmi"},
      {1000, {1000}, Mode::kOutDomain, {{DomainId("bible"), 0.47}, {DomainId("pmi"), 0.33}},
       ComputeBudget::kAmple, Strategy::kMultiDomainITTL, "R5", "pmi"},
      {1000, {25000}, Mode::kOutDomain, {{DomainId("cc"), 0.2}, {DomainId("gov"), 0.6}},
       ComputeBudget::kLimited, Strategy::kMultiDomainFT, "R5", "cc"},
  };
  for (const auto& row : rows) {
    RecommendRequest rq;
    rq.target_size = row.target;
    rq.aux_sizes = row.aux;
    rq.mode = row.mode;
    rq.jsd_to_test = row.jsd;
    rq.budget = row.budget;
    const auto rec = recommend(rq);
    CAPTURE(row.target);
    CAPTURE(row.rule);
    CHECK(rec.strategy == row.want);
    CHECK(rec.rule == row.rule);
    CHECK_FALSE(rec.rationale.empty());
    if (row.final_domain) {
      REQUIRE(rec.final_domain.has_value());
      CHECK(*rec.final_domain == DomainId(row.final_domain));
    } else {
      CHECK_FALSE(rec.final_domain.has_value());
    }
    // R1 gates pre-training only
    const std::size_t total = row.target + [&] {
      std::size_t s = 0;
      for (auto a : row.aux) s += a;
      return s;
    }();
    CHECK(rec.pretraining_allowed == (total >= 50000));
  }

  SUBCASE("out-domain without divergence values degrades") {
    RecommendRequest rq;
    rq.target_size = 1000;
    rq.aux_sizes = {1000};
    rq.mode = Mode::kOutDomain;
    const auto rec = recommend(rq);
    CHECK(rec.rule == "R5");
    CHECK(rec.confidence == "low");
    CHECK_FALSE(rec.final_domain.has_value());
    bool degraded = false;
    for (const auto& w : rec.warnings) degraded |= w.find("degraded") != std::string::npos;
    CHECK(degraded);
  }
  SUBCASE("errors and configurable thresholds") {
    RecommendRequest rq;
    CHECK_THROWS_AS(recommend(rq), Error);
    rq.target_size = 1000;
    rq.aux_sizes = {0};
    CHECK_THROWS_AS(recommend(rq), Error);
    rq.aux_sizes = {5000};
    rq.large_threshold = 5000;
    CHECK(recommend(rq).rule == "R3");
    rq.pretrain_threshold = 6000;
    CHECK(recommend(rq).pretraining_allowed);
    CHECK(parse_compute_budget("ample") == ComputeBudget::kAmple);
    CHECK_THROWS_AS(parse_compute_budget("lots"), Error);
  }
}
