// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "domaincraft/analysis.hpp"
#include "domaincraft/cli.hpp"
#include "domaincraft/divergence.hpp"
#include "domaincraft/error.hpp"
#include "domaincraft/eval.hpp"
#include "domaincraft/experiment.hpp"
#include "domaincraft/mixing.hpp"
#include "domaincraft/model/checkpoint.hpp"
#include "domaincraft/model/train.hpp"
#include "domaincraft/strategy.hpp"
#include "domaincraft/synth.hpp"
#include "domaincraft/util/rng.hpp"

using namespace domaincraft;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Collects failed checks; the first few are reported.
struct Checks {
  int failed = 0;
  int total = 0;
  std::string first;
  void operator()(bool ok, const std::string& what) {
    ++total;
    if (!ok && failed++ < 3) first += (first.empty() ? "" : "; ") + what;
  }
  Verdict verdict(const std::string& summary) const {
    if (failed == 0) return {true, summary + " (" + std::to_string(total) + " checks)"};
    return {false, std::to_string(failed) + "/" + std::to_string(total) + " checks failed: " + first};
  }
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_e(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

ParallelCorpus make_corpus(const std::string& domain, const std::vector<std::pair<std::string, std::string>>& pairs,
                           Split split = Split::kTrain) {
  std::vector<SentencePair> ps;
  for (std::size_t i = 0; i < pairs.size(); ++i) ps.push_back({pairs[i].first, pairs[i].second, i});
  return ParallelCorpus(DomainId(domain), LangPair::parse("xx-yy"), split, std::move(ps));
}

ParallelCorpus numbered(const std::string& domain, std::size_t n) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(domain + " s" + std::to_string(i), domain + " t" + std::to_string(i));
  return make_corpus(domain, pairs);
}

// ---- 1, 2: JSD --------------------------------------------------------------

std::map<std::string, double> random_probs(Rng& rng, std::size_t support, std::size_t universe) {
  std::map<std::string, double> p;
  while (p.size() < support) p["w" + std::to_string(rng.uniform_index(universe))] = 0.0;
  double total = 0.0;
  for (auto& [k, v] : p) total += (v = rng.uniform01() + 1e-3);
  for (auto& [k, v] : p) v /= total;
  return p;
}

// Direct summation over the union of supports, in long double.
double oracle_jsd(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  std::set<std::string> keys;
  for (const auto& [k, v] : p) keys.insert(k);
  for (const auto& [k, v] : q) keys.insert(k);
  long double total = 0;
  for (const auto& k : keys) {
    const long double a = p.contains(k) ? p.at(k) : 0.0L;
    const long double b = q.contains(k) ? q.at(k) : 0.0L;
    const long double m = (a + b) / 2;
    if (a > 0) total += 0.5L * a * std::log2(a / m);
    if (b > 0) total += 0.5L * b * std::log2(b / m);
  }
  return static_cast<double>(total);
}

Verdict jsd_oracle() {
  Rng rng(1);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t universe = 5 + rng.uniform_index(200);
    const auto p = random_probs(rng, 1 + rng.uniform_index(universe), universe);
    const auto q = random_probs(rng, 1 + rng.uniform_index(universe), universe);
    const double got = jsd(FreqDist::from_probabilities(p), FreqDist::from_probabilities(q));
    worst = std::max(worst, std::abs(got - oracle_jsd(p, q)));
  }
  return {worst <= 1e-12, "1000 random pairs, max |impl - oracle| = " + fmt_e(worst) + " (tol 1e-12)"};
}

Verdict jsd_axioms() {
  Checks check;
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const std::size_t universe = 2 + rng.uniform_index(100);
    const auto p = FreqDist::from_probabilities(random_probs(rng, 1 + rng.uniform_index(universe), universe));
    const auto q = FreqDist::from_probabilities(random_probs(rng, 1 + rng.uniform_index(universe), universe));
    const double pq = jsd(p, q), qp = jsd(q, p);
    check(pq == qp, "symmetry");
    check(pq >= 0.0 && pq <= 1.0, "range");
    check(jsd(p, p) == 0.0, "identity");
  }
  for (int t = 0; t < 100; ++t) {
    std::map<std::string, double> a, b;
    const std::size_t na = 1 + rng.uniform_index(30), nb = 1 + rng.uniform_index(30);
    for (std::size_t i = 0; i < na; ++i) a["a" + std::to_string(i)] = rng.uniform01() + 0.01;
    for (std::size_t i = 0; i < nb; ++i) b["b" + std::to_string(i)] = rng.uniform01() + 0.01;
    check(std::abs(jsd(FreqDist::from_probabilities(a), FreqDist::from_probabilities(b)) - 1.0) < 1e-12,
          "disjoint supports give 1");
  }
  // hand value: P = {x: 1}, Q = {x: .5, y: .5}
  const double hand = 0.5 * std::log2(1 / 0.75) + 0.5 * (0.5 * std::log2(0.5 / 0.75) + 0.5 * std::log2(2.0));
  check(std::abs(jsd(FreqDist::from_probabilities({{"x", 1}}), FreqDist::from_probabilities({{"x", .5}, {"y", .5}})) -
                 hand) < 1e-12,
        "hand value");
  return check.verdict("symmetry (bitwise), identity, [0,1] range, disjoint = 1");
}

// ---- 3: gradients -----------------------------------------------------------

Verdict gradient_check() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.width = 8;
  cfg.ff_width = 12;
  cfg.max_len = 24;
  cfg.dropout = 0.0;
  cfg.attention_dropout = 0.0;
  cfg.vocab_size = 14;
  auto params = ModelParams::initialize(cfg, 2);
  Rng jitter(3);
  for (auto& v : params.values) v += 0.05 * jitter.normal();
  const std::vector<TokenizedPair> pairs{
      {{7, 8, 9, 10}, {11, 12}}, {{9, 9, 12}, {7, 10, 8, 11}}, {{12, 7, 11, 8, 9, 10, 8}, {9}}};
  std::string detail;
  bool ok = true;
  for (const Objective obj : {Objective::kNmt, Objective::kBitextDenoise, Objective::kMonoDenoise,
                              Objective::kBitextPlusMonoDenoise}) {
    std::vector<double> grad(params.values.size(), 0.0);
    objective_loss(params, pairs, obj, {}, 17, grad);
    Rng pick(5);
    double worst = 0.0;
    for (int k = 0; k < 300; ++k) {
      const std::size_t i = pick.uniform_index(params.values.size());
      const double saved = params.values[i];
      const double h = 1e-5;
      params.values[i] = saved + h;
      const double up = objective_loss(params, pairs, obj, {}, 17, {});
      params.values[i] = saved - h;
      const double down = objective_loss(params, pairs, obj, {}, 17, {});
      params.values[i] = saved;
      const double num = (up - down) / (2 * h);
      const double denom = std::abs(num) + std::abs(grad[i]);
      if (denom > 1e-8) worst = std::max(worst, std::abs(num - grad[i]) / denom);
    }
    ok = ok && worst < 1e-4;
    detail += (detail.empty() ? "" : ", ") + std::string(to_string(obj)) + " " + fmt_e(worst);
  }
  return {ok, "max relative error: " + detail + " (tol 1e-4)"};
}

// ---- 4: copy task -------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> copy_pairs(std::size_t n, std::uint64_t seed) {
  const char* words[] = {"ka", "lo", "mi", "nu", "pe", "ro", "si", "tu", "va", "ze"};
  Rng rng(seed);
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 3 + rng.uniform_index(4);
    for (std::size_t k = 0; k < len; ++k) s += (k ? " " : "") + std::string(words[rng.uniform_index(10)]);
    out.emplace_back(s, s);
  }
  return out;
}

Verdict copy_task() {
  const auto train = make_corpus("copy", copy_pairs(2000, 11));
  const auto held = make_corpus("copy", copy_pairs(200, 99), Split::kTest);
  const std::vector<ParallelCorpus> cs{train};
  const auto sub = train_bpe(cs, 40);
  ModelConfig mc;
  mc.layers = 1;
  mc.heads = 2;
  mc.width = 32;
  mc.ff_width = 64;
  mc.max_len = 24;
  mc.dropout = 0.0;
  mc.attention_dropout = 0.0;
  mc.vocab_size = sub.vocab_size();
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.epochs = 8;
  tc.warmup_steps = 20;
  const auto data = tokenize_pairs(sub, train.pairs());
  const auto r = train_stage(ModelParams::initialize(mc, 222), data, Objective::kNmt, tc);
  const double score = evaluate(r.params, sub, held, BleuTokenizer::kWord).result.score;
  return {score > 50.0, "held-out BLEU " + fmt(score, 2) + " after " + std::to_string(tc.epochs) +
                            " epochs on 2000 pairs (need > 50)"};
}

// ---- 5: schedules ----------------------------------------------------------------

std::vector<std::string> names_of(const DatasetSpec& d) {
  std::vector<std::string> out;
  for (const auto& c : d.components) out.push_back(c.domain.key());
  return out;
}

Verdict schedule_structure() {
  Checks check;
  const Strategy all[] = {Strategy::kVanillaFT,      Strategy::kMultiDomainFT,  Strategy::kSingleDomainITTL,
                          Strategy::kMultiDomainITTL, Strategy::kPretrainBitext, Strategy::kPretrainBitextMono};
  using V = std::vector<std::string>;
  for (const Mode mode : {Mode::kInDomain, Mode::kOutDomain}) {
    const bool in = mode == Mode::kInDomain;
    for (const Strategy strategy : all) {
      const std::string tag = std::string(to_string(strategy)) + "/" + std::string(to_string(mode));
      ScheduleRequest r;
      r.strategy = strategy;
      r.mode = mode;
      for (const char* d : {"cc", "bible", "pmi"}) r.domains.push_back({DomainId(d), 30000});
      if (!in) r.domains.push_back({DomainId("flores"), 30000});
      r.final_domain = DomainId("pmi");
      if (!in) r.test_domain = DomainId("flores");
      if (strategy == Strategy::kSingleDomainITTL) r.intermediate = {DomainId("bible")};
      const Schedule s = build_schedule(r);
      const auto& last = s.stages.back();
      check(s.test.domain == DomainId(in ? "pmi" : "flores"), tag + " test domain");
      check(s.test.split == Split::kTest, tag + " test split");
      check(last.objective == Objective::kNmt, tag + " final objective");
      if (!in) {
        for (const auto& st : s.stages) check(!st.data.contains(DomainId("flores")), tag + " references test");
      }
      const V aux_in{"cc", "bible", "pmi"}, aux_out{"cc", "bible"};
      switch (strategy) {
        case Strategy::kVanillaFT:
          check(s.stages.size() == 1 && names_of(last.data) == V{"pmi"}, tag);
          break;
        case Strategy::kMultiDomainFT:
          check(s.stages.size() == 1 && names_of(last.data) == aux_in, tag);
          break;
        case Strategy::kSingleDomainITTL:
          check(s.stages.size() == 2 && names_of(s.stages[0].data) == V{"bible"} && names_of(last.data) == V{"pmi"},
                tag);
          break;
        case Strategy::kMultiDomainITTL:
          check(s.stages.size() == 2 && names_of(s.stages[0].data) == (in ? aux_in : aux_out) &&
                    names_of(last.data) == V{"pmi"},
                tag);
          // in-domain: the target is in both stages
          if (in) check(s.stages[0].data.contains(DomainId("pmi")) && last.data.contains(DomainId("pmi")), tag);
          break;
        case Strategy::kPretrainBitext:
        case Strategy::kPretrainBitextMono:
          check(s.stages.size() == 2 && names_of(last.data) == V{"pmi"}, tag);
          check(s.stages[0].objective == (strategy == Strategy::kPretrainBitext ? Objective::kBitextDenoise
                                                                                 : Objective::kBitextPlusMonoDenoise),
                tag + " pre-training objective");
          break;
      }
      bool threw = false;
      try {
        s.validate();
      } catch (const Error&) {
        threw = true;
      }
      check(!threw, tag + " validates");
    }
  }
  return check.verdict("6 strategies x 2 modes");
}

// ---- 6: mixing -----------------------------------------------------------------

Verdict mixing() {
  Checks check;
  const std::vector<ParallelCorpus> corpora{numbered("cc", 1500), numbered("bible", 1200), numbered("gov", 800)};
  const auto spec = DatasetSpec::parse("cc:1000,bible:700,gov:800", 222);
  const auto m = mix(corpora, spec);
  std::multiset<std::string> got, want;
  for (const auto& p : m.pairs) got.insert(p.pair.source);
  for (const auto& c : spec.components) {
    const auto& src = *std::find_if(corpora.begin(), corpora.end(), [&](const auto& x) { return x.domain() == c.domain; });
    const auto drawn = sample(src, c.size, spec.seed);
    for (const auto& p : drawn.pairs()) want.insert(p.source);
  }
  check(got == want, "mix is the multiset union of its component samples");
  check(m.size() == 2500, "mix size");

  Rng rng(6);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.uniform_index(80);
    const std::size_t target = n + rng.uniform_index(600);
    std::map<std::string, std::size_t> occ;
    const auto up = upsample(numbered("x", n), target, static_cast<std::uint64_t>(t));
    for (const auto& p : up.pairs()) ++occ[p.source];
    bool bounds = occ.size() == n && up.size() == target;
    for (const auto& [s, k] : occ) bounds = bounds && k >= target / n && k <= (target + n - 1) / n;
    check(bounds, "floor/ceil bounds n=" + std::to_string(n) + " target=" + std::to_string(target));
  }

  // 1k Bible upsampled to match CC
  const std::vector<ParallelCorpus> setup{numbered("cc", 25000), numbered("bible", 1000)};
  const auto up = mix(setup, DatasetSpec::parse("cc:25000,bible:25000:upsample", 222));
  check(up.count(DomainId("cc")) == 25000 && up.count(DomainId("bible")) == 25000, "1k bible upsampled to 25k");
  std::map<std::string, std::size_t> bible;
  for (const auto& p : up.pairs) {
    if (p.origin == DomainId("bible")) ++bible[p.pair.source];
  }
  bool exact = bible.size() == 1000;
  for (const auto& [s, k] : bible) exact = exact && k == 25;
  check(exact, "each bible pair 25 times");
  return check.verdict("multiset conservation, 500 random upsample bounds, 1k bible matched to 25k cc");
}

// ---- 7: BLEU -----------------------------------------------------------------------

using Sent = std::vector<std::string>;

double oracle_bleu(const std::vector<Sent>& hyp, const std::vector<Sent>& ref) {
  const auto occurrences = [](const Sent& s, const Sent& g, std::size_t at, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t j = 0; j + n <= s.size(); ++j) {
      bool same = true;
      for (std::size_t k = 0; k < n && same; ++k) same = s[j + k] == g[at + k];
      c += same;
    }
    return c;
  };
  double c = 0, r = 0, log_p = 0;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    c += static_cast<double>(hyp[i].size());
    r += static_cast<double>(ref[i].size());
  }
  for (std::size_t n = 1; n <= 4; ++n) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      for (std::size_t j = 0; j + n <= hyp[i].size(); ++j) {
        den += 1;
        const double in_h = static_cast<double>(occurrences(hyp[i], hyp[i], j, n));
        const double in_r = static_cast<double>(occurrences(ref[i], hyp[i], j, n));
        num += std::min(in_h, in_r) / in_h;
      }
    }
    if (den == 0 || num < 0.5) return 0.0;
    log_p += std::log(num / den);
  }
  const double bp = c < r ? std::exp(1 - r / c) : 1.0;
  return 100 * bp * std::exp(log_p / 4);
}

Verdict bleu_checks() {
  Rng rng(7);
  const char* vocab[] = {"a", "b", "c", "d", "e"};
  double worst = 0.0;
  int nonzero = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n_sent = 1 + rng.uniform_index(6);
    const std::size_t w = 2 + rng.uniform_index(4);
    std::vector<Sent> hyp(n_sent), ref(n_sent);
    std::vector<std::string> hs, rs;
    for (std::size_t i = 0; i < n_sent; ++i) {
      for (std::size_t k = 1 + rng.uniform_index(14); k > 0; --k) hyp[i].push_back(vocab[rng.uniform_index(w)]);
      for (std::size_t k = 1 + rng.uniform_index(14); k > 0; --k) ref[i].push_back(vocab[rng.uniform_index(w)]);
      std::string h, r;
      for (const auto& x : hyp[i]) h += (h.empty() ? "" : " ") + x;
      for (const auto& x : ref[i]) r += (r.empty() ? "" : " ") + x;
      hs.push_back(h);
      rs.push_back(r);
    }
    const double want = oracle_bleu(hyp, ref);
    nonzero += want > 0;
    worst = std::max(worst, std::abs(bleu(hs, rs, BleuTokenizer::kWord) - want));
  }
  const std::vector<std::string> refs{"the cat sat on the mat", "a dog ran in the park today"};
  const std::vector<std::string> other{"x y z w v", "p q r s"};
  const double perfect = bleu(refs, refs, BleuTokenizer::kWord);
  const double disjoint = bleu(other, refs, BleuTokenizer::kWord);
  const bool ok = worst <= 1e-9 && nonzero >= 20 && perfect == 100.0 && disjoint == 0.0;
  return {ok, "200 random corpora (" + std::to_string(nonzero) + " nonzero), max |impl - oracle| = " +
                  fmt_e(worst) + " (tol 1e-9); perfect = " + fmt(perfect, 1) + ", disjoint = " + fmt(disjoint, 1)};
}

// ---- 8, 9: synthetic replications -----------------------------------------------

struct Family {
  std::vector<ParallelCorpus> corpora;
  std::vector<DomainSize> sizes;
};

// Four domains at calibrated divergences 0, .15, .4, .7 from a shared
// reference (domain a sits at the reference).
Family synth_family(std::size_t train_size) {
  SynthSpec s;
  s.train_size = train_size;
  s.test_size = 300;
  s.min_len = 3;
  s.max_len = 10;
  const int vocab = 100;
  const char* names[] = {"a", "b", "c", "d"};
  const double targets[] = {0.0, 0.15, 0.4, 0.7};
  for (int i = 0; i < 4; ++i) {
    double overlap = 1.0;
    if (targets[i] > 0) {
      SynthSpec t = s;
      t.domains = {{DomainId(names[i]), vocab, 1.0}};
      overlap = calibrate_overlap(targets[i], t).overlap;
    }
    s.domains.push_back({DomainId(names[i]), vocab, overlap});
  }
  Family f;
  f.corpora = generate(s);
  for (const char* n : names) f.sizes.push_back({DomainId(n), train_size});
  return f;
}

ExperimentContext replication_context(const Family& f) {
  ExperimentContext ctx{.subword = SubwordModel({}, {})};
  for (const auto& c : f.corpora) (c.split() == Split::kTrain ? ctx.train : ctx.test).push_back(c);
  ctx.subword = train_bpe(ctx.train, 2000);
  ctx.model.layers = 2;
  ctx.model.heads = 4;
  ctx.model.width = 64;
  ctx.model.ff_width = 128;
  ctx.model.dropout = 0.1;
  ctx.model.attention_dropout = 0.0;
  ctx.train_cfg.epochs = 20;
  ctx.train_cfg.learning_rate = 2e-3;
  ctx.train_cfg.warmup_steps = 50;
  ctx.train_cfg.batch_size = 32;
  ctx.tokenizer = BleuTokenizer::kWord;
  return ctx;
}

// ITTL's final stage runs half as many epochs as the first.
Schedule replication_schedule(const ScheduleRequest& rq, const ExperimentContext& ctx) {
  Schedule s = build_schedule(rq);
  if (s.stages.size() == 2) {
    TrainConfig final_cfg = ctx.train_cfg;
    final_cfg.epochs = 10;
    s.stages.back().train = final_cfg;
  }
  return s;
}

Verdict divergence_replication() {
  const Family f = synth_family(2000);
  Runner runner(replication_context(f));
  const char* names[] = {"a", "b", "c", "d"};
  std::vector<double> vx, vy, mx, my;
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 4; ++j) {
      if (j == k) continue;
      for (const Strategy st : {Strategy::kVanillaFT, Strategy::kMultiDomainITTL}) {
        ScheduleRequest rq;
        rq.strategy = st;
        rq.mode = Mode::kOutDomain;
        rq.domains = f.sizes;
        rq.final_domain = DomainId(names[j]);
        rq.test_domain = DomainId(names[k]);
        rq.im_size = 2000;
        rq.fi_size = 2000;
        const auto o = runner.run(replication_schedule(rq, runner.context()));
        auto& xs = st == Strategy::kVanillaFT ? vx : mx;
        auto& ys = st == Strategy::kVanillaFT ? vy : my;
        xs.push_back(o.jsd_final_to_test);
        ys.push_back(o.evaluation.result.score);
        std::fprintf(stderr, "  [8] %-45s jsd %.3f bleu %6.2f\n", o.schedule_id.c_str(), o.jsd_final_to_test,
                     o.evaluation.result.score);
      }
    }
  }
  const double rho = spearman(vx, vy);
  const double r2v = r_squared(vx, vy);
  const double r2m = r_squared(mx, my);
  const double lo = *std::min_element(vx.begin(), vx.end()), hi = *std::max_element(vx.begin(), vx.end());
  const bool ok = rho < -0.8 && r2v > r2m;
  return {ok, "12 out-domain orderings, JSD range [" + fmt(lo) + ", " + fmt(hi) + "]; vanilla Spearman " + fmt(rho) +
                  " (need < -0.8); R2 vanilla " + fmt(r2v) + " vs multi-domain ITTL " + fmt(r2m) +
                  " (need vanilla > ITTL)"};
}

Verdict size_replication() {
  const std::size_t small = 1000, large = 8000;
  const Family f = synth_family(large);
  Runner runner(replication_context(f));
  std::map<std::size_t, double> gain;
  std::string scores;
  for (const std::size_t fi : {small, large}) {
    double v = 0, m = 0;
    for (const Strategy st : {Strategy::kVanillaFT, Strategy::kMultiDomainITTL}) {
      ScheduleRequest rq;
      rq.strategy = st;
      rq.mode = Mode::kInDomain;
      rq.domains = f.sizes;
      rq.final_domain = DomainId("a");
      rq.im_size = 2000;
      rq.fi_size = fi;
      const auto o = runner.run(replication_schedule(rq, runner.context()));
      (st == Strategy::kVanillaFT ? v : m) = o.evaluation.result.score;
      std::fprintf(stderr, "  [9] %-45s bleu %6.2f\n", o.schedule_id.c_str(), o.evaluation.result.score);
    }
    gain[fi] = m - v;
    scores += (scores.empty() ? "" : "; ") + std::string("target ") + std::to_string(fi) + ": vanilla " + fmt(v, 2) +
              ", multi-domain ITTL " + fmt(m, 2);
  }
  const bool ok = gain[small] > 0 && gain[large] < gain[small];
  return {ok, scores + "; gain " + fmt(gain[small], 2) + " at 1k, " + fmt(gain[large], 2) +
                  " at 8k (need > 0, then smaller)"};
}

// ---- 10: recommender -----------------------------------------------------------

Verdict recommender() {
  Checks check;
  struct Row {
    std::size_t target;
    std::vector<std::size_t> aux;
    Mode mode;
    std::map<DomainId, double> jsd;
    ComputeBudget budget;
    Strategy want;
    std::string rule;
    std::string final_domain;
  };
  const std::vector<Row> rows{
      // small-small, limited compute
      {1000, {1000, 1000}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kMultiDomainFT, "R4", ""},
      {1000, {1000, 1000}, Mode::kInDomain, {}, ComputeBudget::kAmple, Strategy::kMultiDomainITTL, "R4", ""},
      // large-small
      {1000, {25000}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kMultiDomainITTL, "R3", ""},
      {1000, {25000, 25000}, Mode::kInDomain, {}, ComputeBudget::kAmple, Strategy::kMultiDomainITTL, "R3", ""},
      // target large
      {25000, {1000}, Mode::kInDomain, {}, ComputeBudget::kLimited, Strategy::kVanillaFT, "R2", ""},
      {25000, {25000}, Mode::kInDomain, {}, ComputeBudget::kAmple, Strategy::kVanillaFT, "R2", ""},
      // out-domain: lowest JSD final domain
      {1000, {1000}, Mode::kOutDomain, {{DomainId("bible"), 0.47}, {DomainId("pmi"), 0.33}}, ComputeBudget::kLimited,
       Strategy::kMultiDomainFT, "R5", "pmi"},
      {1000, {1000}, Mode::kOutDomain, {{DomainId("bible"), 0.47}, {DomainId("pmi"), 0.33}}, ComputeBudget::kAmple,
       Strategy::kMultiDomainITTL, "R5", "pmi"},
      {25000, {25000}, Mode::kOutDomain, {{DomainId("cc"), 0.61}, {DomainId("gov"), 0.2}, {DomainId("bible"), 0.5}},
       ComputeBudget::kLimited, Strategy::kMultiDomainFT, "R5", "gov"},
  };
  for (const auto& row : rows) {
    RecommendRequest rq;
    rq.target_size = row.target;
    rq.aux_sizes = row.aux;
    rq.mode = row.mode;
    rq.jsd_to_test = row.jsd;
    rq.budget = row.budget;
    const auto rec = recommend(rq);
    const std::string tag = std::to_string(row.target) + "/" + std::string(to_string(row.mode)) + "/" +
                            std::string(to_string(row.budget));
    check(rec.strategy == row.want, tag + " strategy");
    check(rec.rule == row.rule, tag + " rule " + rec.rule);
    check(row.final_domain.empty() ? !rec.final_domain : rec.final_domain == DomainId(row.final_domain),
          tag + " final domain");
    std::size_t total = row.target;
    for (const auto a : row.aux) total += a;
    check(rec.pretraining_allowed == (total >= 50000), tag + " R1 gate");
  }
  return check.verdict(std::to_string(rows.size()) + " worked examples");
}

// ---- 11: reproducibility ----------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::fprintf(stderr, "  [11] %s", err.str().c_str());
  return code;
}

Verdict reproducibility() {
  Checks check;
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("domaincraft-accept-" + std::to_string(rd()));
  const std::string ws = root.string();
  check(cli({"--workspace", ws, "synth", "--domains", "a,b", "--overlaps", "1,0.5", "--vocab", "30", "--train-size",
             "600", "--test-size", "50", "--min-len", "3", "--max-len", "6"}) == 0,
        "synth");
  std::ofstream(root / "domaincraft.conf") << "seed = 222\nmodel.layers = 1\nmodel.heads = 2\nmodel.width = 32\n"
                                              "model.ff_width = 64\nmodel.dropout = 0.1\ntrain.epochs = 4\n"
                                              "train.lr = 3e-3\nsubword.vocab_size = 120\n";
  check(cli({"--workspace", ws, "plan", "--strategy", "multi-domain-ittl", "--target", "a", "--mode", "in-domain",
             "--im-size", "500", "--fi-size", "300"}) == 0,
        "plan");
  const std::string id = "mdittl_in_xx-yy_aux-b_im500_fi300-a_test-a";
  check(cli({"--workspace", ws, "train", "--schedule", id}) == 0, "train");
  const std::string results = slurp(root / "results.csv");
  const std::string ckpt = slurp(root / "runs" / id / "model.ckpt");
  std::string replay_out;
  check(cli({"--workspace", ws, "train", "--manifest", (root / "runs" / id / "manifest.json").string()},
            &replay_out) == 0,
        "train --manifest");
  check(slurp(root / "results.csv") == results, "results rows identical after replay");
  check(replay_out.find("(already recorded)") != std::string::npos, "replay row matches the recorded row");
  check(slurp(root / "runs" / id / "model.ckpt") == ckpt, "checkpoint bytes identical after replay");
  const std::string row = results.substr(results.find('\n') + 1);

  // checkpoint round-trip
  bool exact = false;
  try {
    const ModelParams p = load_checkpoint(root / "runs" / id / "model.ckpt");
    save_checkpoint(p, root / "copy.ckpt");
    const ModelParams q = load_checkpoint(root / "copy.ckpt");
    exact = p.config == q.config && p.values.size() == q.values.size() &&
            std::memcmp(p.values.data(), q.values.data(), p.values.size() * sizeof(double)) == 0 &&
            slurp(root / "copy.ckpt") == ckpt;
  } catch (const Error& e) {
    std::fprintf(stderr, "  [11] %s\n", e.what());
  }
  check(exact, "checkpoint save/load bit-exact");
  std::error_code ec;
  fs::remove_all(root, ec);
  std::string shown = row;
  while (!shown.empty() && shown.back() == '\n') shown.pop_back();
  return check.verdict("row '" + shown + "' reproduced from its manifest; checkpoint round-trip bit-exact");
}

struct Criterion {
  int number;
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "JSD oracle equivalence", 10, jsd_oracle},
      {2, "JSD axioms", 10, jsd_axioms},
      {3, "gradient check", 120, gradient_check},
      {4, "training sanity (copy task)", 300, copy_task},
      {5, "schedule structure", 1e9, schedule_structure},
      {6, "mixing and upsampling", 1e9, mixing},
      {7, "BLEU correctness", 1e9, bleu_checks},
      {8, "divergence vs score replication", 3600, divergence_replication},
      {9, "target-size replication", 3600, size_replication},
      {10, "recommender", 1, recommender},
      {11, "reproducibility", 1e9, reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      v.pass = false;
      v.detail += "; over the " + fmt(c.budget_s, 0) + " s budget";
    }
    failed += !v.pass;
    std::printf("criterion %2d %s: %s - %s [%.1f s]\n", c.number, v.pass ? "PASS" : "FAIL", c.name,
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
