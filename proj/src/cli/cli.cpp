#include "domaincraft/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "domaincraft/analysis.hpp"
#include "domaincraft/divergence.hpp"
#include "domaincraft/error.hpp"
#include "domaincraft/experiment.hpp"
#include "domaincraft/model/checkpoint.hpp"
#include "domaincraft/strategy.hpp"
#include "domaincraft/synth.hpp"
#include "domaincraft/util/digest.hpp"
#include "domaincraft/workspace/manifest.hpp"
#include "domaincraft/workspace/results.hpp"
#include "domaincraft/workspace/svg.hpp"
#include "domaincraft/workspace/workspace.hpp"

namespace fs = std::filesystem;

namespace domaincraft {
namespace {

struct Globals {
  std::string workspace;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> sets;
};

std::string fixed(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

std::string rel(const Workspace& ws, const fs::path& p) {
  return fs::relative(p, ws.root()).generic_string();
}

Workspace open_workspace(const Globals& g) { return Workspace::open(Workspace::locate(g.workspace)); }

// Flag > config file > built-in default: flags are written over the file's
// values before resolution.
Settings load_settings(const Workspace& ws, const Globals& g,
                       const std::map<std::string, std::string>& flags = {}) {
  KeyValueConfig cfg = ws.config();
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kConfig, "--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  for (const auto& [k, v] : flags) cfg.set(k, v);
  return Settings::resolve(cfg, ws.root(),
                           g.seed_given ? std::optional<std::uint64_t>(g.seed) : std::nullopt);
}

std::vector<DomainSize> domain_sizes(const Workspace& ws, const LangPair& lang) {
  std::vector<DomainSize> out;
  for (const auto& c : ws.load_corpora(lang, Split::kTrain)) out.push_back({c.domain(), c.size()});
  return out;
}

std::set<DomainId> test_domains(const Workspace& ws, const LangPair& lang) {
  std::set<DomainId> out;
  for (const auto& f : ws.list_corpora()) {
    if (f.lang == lang && f.split == Split::kTest) out.insert(f.domain);
  }
  return out;
}

std::string describe_schedule(const Schedule& s) {
  std::ostringstream o;
  o << "schedule " << s.id << "\n";
  o << "  strategy: " << to_string(s.strategy) << "\n";
  o << "  mode: " << to_string(s.mode) << "\n";
  o << "  test: " << s.test.domain.name() << "/" << to_string(s.test.split) << "\n";
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    const auto& st = s.stages[i];
    o << "  stage " << i + 1 << ": " << to_string(st.objective) << " on " << st.data.str()
      << " (seed " << st.data.seed << ")\n";
  }
  return o.str();
}

// ---- ingest ---------------------------------------------------------------

int cmd_ingest(const Globals& g, const std::string& domain, const std::string& lang,
               const std::string& split, const std::string& src, const std::string& tgt,
               const std::string& tsv, std::ostream& out) {
  const Workspace ws = Workspace::create(Workspace::locate(g.workspace));
  const LangPair lp = LangPair::parse(lang);
  const Split sp = parse_split(split);
  LoadedCorpus loaded = [&] {
    if (!tsv.empty()) {
      if (!src.empty() || !tgt.empty()) {
        throw Error(ErrorKind::kConfig, "give either --tsv or --src/--tgt");
      }
      return load_tsv(tsv, DomainId(domain), lp, sp);
    }
    if (src.empty() || tgt.empty()) throw Error(ErrorKind::kConfig, "--src and --tgt are both required");
    return load_parallel(src, tgt, DomainId(domain), lp, sp);
  }();
  ws.write_corpus(loaded.corpus);
  ws.invalidate_subword();
  out << "ingested " << loaded.corpus.size() << " pairs into corpora/" << lp.str() << "/"
      << domain << "/" << split << " (" << loaded.report.dropped << " dropped)\n";
  return 0;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::vector<std::string> domains;
  std::vector<double> overlaps;
  std::vector<double> jsd;
  int vocab = 200;
  std::size_t train_size = 5000;
  std::size_t dev_size = 0;
  std::size_t test_size = 500;
  int min_len = 4;
  int max_len = 10;
  std::string lang = "xx-yy";
};

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
  const Workspace ws = Workspace::create(Workspace::locate(g.workspace));
  const Settings settings = load_settings(ws, g);
  if (a.domains.empty()) throw Error(ErrorKind::kConfig, "--domains is required");
  if (!a.overlaps.empty() && !a.jsd.empty()) {
    throw Error(ErrorKind::kConfig, "give either --overlaps or --jsd");
  }
  const auto& values = a.overlaps.empty() ? a.jsd : a.overlaps;
  if (!values.empty() && values.size() != a.domains.size()) {
    throw Error(ErrorKind::kConfig, "need one value per domain");
  }
  SynthSpec spec;
  spec.lang = LangPair::parse(a.lang);
  spec.train_size = a.train_size;
  spec.dev_size = a.dev_size;
  spec.test_size = a.test_size;
  spec.min_len = a.min_len;
  spec.max_len = a.max_len;
  spec.generation_seed = settings.seed;
  spec.translation_seed = settings.seed;
  for (std::size_t i = 0; i < a.domains.size(); ++i) {
    spec.domains.push_back({DomainId(a.domains[i]), a.vocab, a.overlaps.empty() ? 1.0 : a.overlaps[i]});
  }
  std::vector<double> measured(a.domains.size(), -1.0);
  if (!a.jsd.empty()) {
    for (std::size_t i = 0; i < a.domains.size(); ++i) {
      if (a.jsd[i] <= 0.0) continue;  // fully shared vocabulary
      SynthSpec probe = spec;
      probe.domains = {spec.domains[i]};
      const Calibration cal = calibrate_overlap(a.jsd[i], probe);
      spec.domains[i].overlap = cal.overlap;
      measured[i] = cal.measured_jsd;
    }
  }
  spec.validate();
  for (const auto& c : generate(spec)) ws.write_corpus(c);
  ws.invalidate_subword();
  out << "domain,overlap,calibrated_jsd\n";
  for (std::size_t i = 0; i < spec.domains.size(); ++i) {
    out << spec.domains[i].domain.name() << "," << fixed(spec.domains[i].overlap)
        << "," << (measured[i] < 0 ? std::string("-") : fixed(measured[i])) << "\n";
  }
  return 0;
}

// ---- divergence -----------------------------------------------------------

int cmd_divergence(const Globals& g, const std::string& split, const std::string& side,
                   std::ostream& out) {
  const Workspace ws = open_workspace(g);
  std::map<std::string, std::string> flags;
  if (!side.empty()) flags["divergence.side_policy"] = side;
  const Settings settings = load_settings(ws, g, flags);
  const std::optional<Split> sp =
      split == "all" ? std::nullopt : std::optional<Split>(parse_split(split));
  const auto corpora = ws.load_corpora(settings.lang, sp);
  if (corpora.empty()) throw Error(ErrorKind::kIo, "no corpora for split " + split);
  const DivergenceMatrix m = divergence_matrix(corpora, settings.side_policy, settings.stopwords);
  std::ostringstream csv;
  write_matrix_csv(csv, m);
  out << csv.str();
  write_text(ws.reports_dir() / "divergence.csv", csv.str());
  std::vector<std::string> labels;
  for (const auto& l : m.labels) labels.push_back(l.str());
  write_text(ws.reports_dir() / "divergence.svg",
             render_heatmap("Jensen-Shannon divergence (" + std::string(to_string(settings.side_policy)) + ")",
                            labels, m.values));
  return 0;
}

// ---- plan -----------------------------------------------------------------

struct PlanArgs {
  std::vector<std::string> strategies;
  std::string mode = "in-domain";
  std::string target;
  std::string test;
  std::vector<std::string> intermediate;
  std::vector<std::size_t> im_sizes{1000};
  std::vector<std::size_t> fi_sizes{1000};
  bool upsample = false;
};

int cmd_plan(const Globals& g, const PlanArgs& a, std::ostream& out) {
  const Workspace ws = open_workspace(g);
  const Settings settings = load_settings(ws, g);
  const LangPair lang = ws.active_lang(settings);
  const auto sizes = domain_sizes(ws, lang);
  const auto tests = test_domains(ws, lang);
  const Mode mode = parse_mode(a.mode);
  const DomainId test = a.test.empty() ? DomainId(a.target) : DomainId(a.test);
  if (!tests.contains(test)) {
    throw Error(ErrorKind::kUnknownDomain, "no test split for domain " + test.name());
  }
  std::vector<Schedule> planned;
  for (const auto& sname : a.strategies) {
    for (const auto im : a.im_sizes) {
      for (const auto fi : a.fi_sizes) {
        ScheduleRequest req;
        req.strategy = parse_strategy(sname);
        req.mode = mode;
        req.domains = sizes;
        req.final_domain = DomainId(a.target);
        if (mode == Mode::kOutDomain || !a.test.empty()) req.test_domain = test;
        for (const auto& d : a.intermediate) req.intermediate.push_back(DomainId(d));
        req.im_size = im;
        req.fi_size = fi;
        req.seed = settings.seed;
        req.allow_upsample = a.upsample;
        req.lang = lang;
        Schedule s = build_schedule(req);
        if (std::none_of(planned.begin(), planned.end(),
                         [&](const Schedule& p) { return p.id == s.id; })) {
          planned.push_back(std::move(s));
        }
      }
    }
  }
  for (const auto& s : planned) {
    save_schedule(ws, s);
    out << describe_schedule(s);
    out << "  manifest: " << rel(ws, ws.schedules_dir() / (s.id + ".json")) << "\n";
  }
  return 0;
}

// ---- train ----------------------------------------------------------------

// A schedule id names one run: a second run under other settings or data
// would leave its results row pointing at the wrong manifest.
void check_same_run(const Workspace& ws, const RunManifest& m) {
  const fs::path path = ws.run_dir(m.schedule.id) / "manifest.json";
  if (!fs::exists(path)) return;
  const RunManifest prev = RunManifest::load(path);
  if (prev.settings_sha256 != m.settings_sha256 || prev.data_seed != m.data_seed ||
      prev.init_seed != m.init_seed || prev.train_seed != m.train_seed ||
      prev.corpus_digests != m.corpus_digests || prev.subword_sha256 != m.subword_sha256 ||
      !(prev.schedule == m.schedule)) {
    throw Error(ErrorKind::kResults, "schedule '" + m.schedule.id +
                                         "' already ran with other settings or data; remove " +
                                         rel(ws, ws.run_dir(m.schedule.id)) + " to rerun it");
  }
}

RunManifest execute(const Workspace& ws, const Schedule& schedule, const Settings& settings,
                    std::ostream& out) {
  const LangPair lang = schedule.lang.value_or(ws.active_lang(settings));
  ExperimentContext ctx{
      .train = ws.load_corpora(lang, Split::kTrain),
      .test = ws.load_corpora(lang, schedule.test.split),
      .subword = ws.subword(settings),
      .model = settings.model,
      .train_cfg = settings.train,
      .noise = settings.noise,
      .init_seed = settings.init_seed,
      .tokenizer = settings.tokenizer,
      .side_policy = settings.side_policy,
      .stopwords = settings.stopwords,
  };
  RunManifest m;
  m.schedule = schedule;
  m.data_seed = schedule.stages.front().data.seed;
  m.init_seed = settings.init_seed;
  m.train_seed = settings.train.seed;
  m.train = settings.train;
  m.noise = settings.noise;
  m.tokenizer = settings.tokenizer;
  m.side_policy = settings.side_policy;
  m.subword_vocab = settings.subword_vocab;
  m.stopword_files = settings.stopword_files;
  m.config_file_sha256 = fs::exists(ws.config_path()) ? sha256_file(ws.config_path()) : "";
  m.corpus_digests = corpus_digests(ws);
  m.subword_sha256 = sha256_file(ws.subword_path());
  m.started = utc_timestamp();

  Runner runner(std::move(ctx));
  m.model = runner.context().model;
  m.settings_sha256 = settings_digest(m.model, m.train, m.noise, m.tokenizer, m.side_policy);
  check_same_run(ws, m);
  const RunOutcome outcome =
      runner.run(schedule, [&](std::size_t i, const StageOutput& st, bool) {
        out << "stage " << i + 1 << ":";
        for (const auto& e : st.log) out << " epoch " << e.epoch << " loss " << fixed(e.mean_loss);
        out << "\n";
      });
  const fs::path dir = ws.run_dir(schedule.id);
  fs::create_directories(dir);
  save_checkpoint(outcome.params(), dir / "model.ckpt");
  std::string hyps;
  for (const auto& h : outcome.evaluation.hypotheses) hyps += h + "\n";
  write_text(dir / "hypotheses.txt", hyps);
  m.checkpoint = rel(ws, dir / "model.ckpt");
  m.hypotheses = rel(ws, dir / "hypotheses.txt");
  m.metric = outcome.evaluation.result.metric;
  m.score = outcome.evaluation.result.score;
  m.jsd_final_to_test = outcome.jsd_final_to_test;
  for (const auto& st : outcome.stages) m.stage_logs.push_back(st->log);
  m.finished = utc_timestamp();
  return m;
}

void check_replayable(const Workspace& ws, const RunManifest& m) {
  const auto now = corpus_digests(ws);
  for (const auto& [path, digest] : m.corpus_digests) {
    const auto it = now.find(path);
    if (it == now.end()) throw Error(ErrorKind::kManifest, "corpus " + path + " is missing");
    if (it->second != digest) throw Error(ErrorKind::kManifest, "corpus " + path + " changed since the run");
  }
  for (const auto& [path, digest] : now) {
    if (!m.corpus_digests.contains(path)) {
      throw Error(ErrorKind::kManifest, "corpus " + path + " was added since the run");
    }
  }
  if (fs::exists(ws.subword_path()) && sha256_file(ws.subword_path()) != m.subword_sha256) {
    throw Error(ErrorKind::kManifest, "subword model differs from the one the run used");
  }
  if (settings_digest(m.model, m.train, m.noise, m.tokenizer, m.side_policy) != m.settings_sha256) {
    throw Error(ErrorKind::kManifest, "manifest settings do not match their recorded hash");
  }
}

Settings settings_from_manifest(const RunManifest& m) {
  Settings s;
  s.model = m.model;
  s.model.vocab_size = 0;
  s.train = m.train;
  s.noise = m.noise;
  s.tokenizer = m.tokenizer;
  s.side_policy = m.side_policy;
  s.seed = m.data_seed;
  s.init_seed = m.init_seed;
  s.lang = m.schedule.lang;
  s.stopword_files = m.stopword_files;
  for (const auto& [lang, file] : m.stopword_files) s.stopwords[lang] = load_stopwords(file);
  s.subword_vocab = m.subword_vocab;
  return s;
}

struct TrainArgs {
  std::string schedule;
  std::string manifest;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  const Workspace ws = open_workspace(g);
  if (a.schedule.empty() == a.manifest.empty()) {
    throw Error(ErrorKind::kConfig, "give exactly one of --schedule or --manifest");
  }
  Schedule schedule;
  Settings settings;
  std::optional<RunManifest> replay;
  if (!a.manifest.empty()) {
    if (a.epochs || a.lr || a.batch_size || g.seed_given || !g.sets.empty()) {
      throw Error(ErrorKind::kConfig, "a manifest re-run takes every setting from the manifest");
    }
    fs::path path = a.manifest;
    if (path.is_relative() && !fs::exists(path)) path = ws.root() / path;
    replay = RunManifest::load(path);
    check_replayable(ws, *replay);
    schedule = replay->schedule;
    settings = settings_from_manifest(*replay);
  } else {
    std::map<std::string, std::string> flags;
    if (a.epochs) flags["train.epochs"] = std::to_string(*a.epochs);
    if (a.lr) {
      std::ostringstream s;
      s.precision(17);
      s << *a.lr;
      flags["train.lr"] = s.str();
    }
    if (a.batch_size) flags["train.batch_size"] = std::to_string(*a.batch_size);
    settings = load_settings(ws, g, flags);
    schedule = load_schedule(ws, a.schedule);
  }
  out << describe_schedule(schedule);
  RunManifest m = execute(ws, schedule, settings, out);
  if (replay) {
    if (m.subword_sha256 != replay->subword_sha256) {
      throw Error(ErrorKind::kManifest, "rebuilt subword model differs from the one the run used");
    }
    // keep the original timestamps when the outcome is identical
    if (m.score == replay->score && m.stage_logs == replay->stage_logs) {
      m.started = replay->started;
      m.finished = replay->finished;
    }
  }
  m.save(ws.run_dir(schedule.id) / "manifest.json");
  RunResult r;
  r.schedule_id = schedule.id;
  r.strategy = schedule.strategy;
  r.mode = schedule.mode;
  r.im_size = schedule.im_size;
  r.fi_size = schedule.fi_size;
  r.test_domain = schedule.test.domain;
  r.metric = m.metric;
  r.score = m.score;
  const ResultRow row = to_row(r);
  const bool added = ResultsStore(ws.results_path()).append(row);
  out << "result: " << row.line() << (added ? "" : " (already recorded)") << "\n";
  out << "manifest: " << rel(ws, ws.run_dir(schedule.id) / "manifest.json") << "\n";
  return 0;
}

// ---- evaluate -------------------------------------------------------------

int cmd_evaluate(const Globals& g, const std::string& id, const std::string& tokenizer,
                 std::ostream& out) {
  const Workspace ws = open_workspace(g);
  const RunManifest m = RunManifest::load(ws.run_dir(id) / "manifest.json");
  const BleuTokenizer tok = tokenizer.empty() ? m.tokenizer : parse_bleu_tokenizer(tokenizer);
  const ModelParams params = load_checkpoint(ws.root() / m.checkpoint);
  if (!(params.config == m.model)) {
    throw Error(ErrorKind::kManifest, "checkpoint shape does not match the manifest");
  }
  if (!fs::exists(ws.subword_path()) || sha256_file(ws.subword_path()) != m.subword_sha256) {
    throw Error(ErrorKind::kManifest, "subword model differs from the one the run used");
  }
  const SubwordModel subword = SubwordModel::load(ws.subword_path());
  const LangPair lang = m.schedule.lang.value_or(LangPair::parse(ws.list_corpora().at(0).lang.str()));
  std::optional<ParallelCorpus> test;
  for (auto& c : ws.load_corpora(lang, m.schedule.test.split)) {
    if (c.domain() == m.schedule.test.domain) test = std::move(c);
  }
  if (!test) throw Error(ErrorKind::kUnknownDomain, "no test corpus for " + m.schedule.test.domain.name());
  const Evaluation ev = evaluate(params, subword, *test, tok, id);
  RunResult r;
  r.schedule_id = id;
  r.strategy = m.schedule.strategy;
  r.mode = m.schedule.mode;
  r.im_size = m.schedule.im_size;
  r.fi_size = m.schedule.fi_size;
  r.test_domain = m.schedule.test.domain;
  r.metric = ev.result.metric;
  r.score = ev.result.score;
  const ResultRow row = to_row(r);
  const bool added = ResultsStore(ws.results_path()).append(row);
  out << "signature: " << bleu_signature(tok) << "\n";
  out << "result: " << row.line() << (added ? "" : " (already recorded)") << "\n";
  return 0;
}

// ---- analyze / report -----------------------------------------------------

struct Joined {
  std::vector<RunResult> runs;
  std::vector<std::string> orphans;
};

Joined join_results(const Workspace& ws, const std::string& metric) {
  Joined j;
  for (const auto& row : ResultsStore(ws.results_path()).read()) {
    const fs::path mpath = ws.run_dir(row.schedule_id) / "manifest.json";
    if (!fs::exists(mpath)) {
      j.orphans.push_back(row.schedule_id);
      continue;
    }
    if (!metric.empty() && row.metric != metric) continue;
    const RunManifest m = RunManifest::load(mpath);
    RunResult r;
    r.schedule_id = row.schedule_id;
    r.strategy = parse_strategy(row.strategy);
    r.mode = parse_mode(row.mode);
    r.test_domain = DomainId(row.test_domain);
    r.im_size = row.im_size;
    r.fi_size = row.fi_size;
    r.metric = row.metric;
    r.score = row.score_value();
    r.jsd_final_to_test = m.jsd_final_to_test;
    j.runs.push_back(r);
  }
  return j;
}

struct GroupStats {
  Strategy strategy;
  Mode mode;
  std::vector<double> jsd, score;
};

std::vector<GroupStats> group(const std::vector<RunResult>& runs) {
  std::vector<GroupStats> out;
  for (const auto& r : runs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const GroupStats& g) {
      return g.strategy == r.strategy && g.mode == r.mode;
    });
    if (it == out.end()) {
      out.push_back({r.strategy, r.mode, {}, {}});
      it = std::prev(out.end());
    }
    it->jsd.push_back(r.jsd_final_to_test);
    it->score.push_back(r.score);
  }
  std::sort(out.begin(), out.end(), [](const GroupStats& a, const GroupStats& b) {
    if (a.mode != b.mode) return a.mode < b.mode;
    return a.strategy < b.strategy;
  });
  return out;
}

bool distinct_x(const std::vector<double>& xs) {
  return xs.size() >= 2 && std::any_of(xs.begin(), xs.end(), [&](double x) { return x != xs[0]; });
}

std::string summary_csv(const std::vector<GroupStats>& groups) {
  std::string s = "strategy,mode,runs,mean_score,variance,r2_jsd_score,spearman_jsd_score\n";
  for (const auto& g : groups) {
    double mean = 0;
    for (const double v : g.score) mean += v;
    mean /= static_cast<double>(g.score.size());
    const bool fit = distinct_x(g.jsd);
    s += std::string(to_string(g.strategy)) + "," + std::string(to_string(g.mode)) + "," +
         std::to_string(g.score.size()) + "," + fixed(mean) + "," +
         (g.score.size() >= 2 ? fixed(variance(g.score)) : "-") + "," +
         (fit ? fixed(r_squared(g.jsd, g.score)) : "-") + "," +
         (fit ? fixed(spearman(g.jsd, g.score)) : "-") + "\n";
  }
  return s;
}

std::string scatter(const std::vector<GroupStats>& groups, const std::string& metric) {
  ScatterPlot plot{"Divergence vs " + metric, "JSD(final-stage data, test)", metric, {}};
  for (const auto& g : groups) {
    plot.series.push_back({std::string(to_string(g.strategy)) + " (" + std::string(to_string(g.mode)) + ")",
                           g.jsd, g.score, true});
  }
  return render_scatter(plot);
}

std::string default_metric(const Workspace& ws, const Globals& g) {
  return std::string(metric_name(load_settings(ws, g).tokenizer));
}

constexpr const char* kPopulationNote =
    "population: every results row of the chosen metric with a run manifest; variance is the "
    "population (1/n) variance";

int cmd_analyze(const Globals& g, std::string metric, std::ostream& out) {
  const Workspace ws = open_workspace(g);
  if (metric.empty()) metric = default_metric(ws, g);
  const Joined j = join_results(ws, metric);
  for (const auto& o : j.orphans) out << "warning: results row " << o << " has no run manifest\n";
  if (j.runs.empty()) throw Error(ErrorKind::kResults, "no " + metric + " results to analyze");
  const auto groups = group(j.runs);
  const std::string csv = summary_csv(groups);
  write_text(ws.reports_dir() / "analysis_summary.csv", csv);
  write_text(ws.reports_dir() / "jsd_vs_score.svg", scatter(groups, metric));
  out << "metric: " << metric << "\n" << kPopulationNote << "\n" << csv;
  out << "wrote " << rel(ws, ws.reports_dir() / "analysis_summary.csv") << ", "
      << rel(ws, ws.reports_dir() / "jsd_vs_score.svg") << "\n";
  return 0;
}

int cmd_report(const Globals& g, std::string metric, std::ostream& out) {
  const Workspace ws = open_workspace(g);
  if (metric.empty()) metric = default_metric(ws, g);
  const Joined j = join_results(ws, metric);
  if (!j.orphans.empty()) {
    std::string ids;
    for (const auto& o : j.orphans) ids += (ids.empty() ? "" : ", ") + o;
    throw Error(ErrorKind::kResults, "orphan results rows without a run manifest: " + ids);
  }
  if (j.runs.empty()) throw Error(ErrorKind::kResults, "no " + metric + " results to report");
  std::ostringstream md;
  md << "# Results report\n\n";
  md << "Metric: " << metric << " (" << bleu_signature(metric == "bleu" ? BleuTokenizer::kWord
                                                                       : BleuTokenizer::kSubword)
     << ")\n\n";
  if (metric == "spbleu") {
    md << "Subword BLEU tokenizes with this workspace's BPE model rather than a shared "
          "multilingual one, so scores compare within the workspace only.\n\n";
  }
  for (const auto& cell : tabulate(j.runs)) {
    md << "## " << to_string(cell.mode) << ", IM " << cell.im_size << ", FI " << cell.fi_size
       << "\n\n";
    md << "| rank | strategy | mean " << metric << " | runs | mark |\n";
    md << "|---:|---|---:|---:|---|\n";
    for (std::size_t i = 0; i < cell.ranking.size(); ++i) {
      const auto& r = cell.ranking[i];
      md << "| " << i + 1 << " | " << to_string(r.strategy) << " | " << fixed(r.score, 2) << " | "
         << r.runs << " | " << (i == 0 ? "best" : i == 1 ? "second" : "") << " |\n";
    }
    if (cell.compute_limited_pick) {
      md << "\nUnder limited compute: " << to_string(*cell.compute_limited_pick)
         << " (within " << fixed(kComputeMargin, 1) << " of the best at lower cost).\n";
    }
    md << "\n";
  }
  const auto groups = group(j.runs);
  md << "## Divergence and score\n\n" << kPopulationNote << ".\n\n```\n" << summary_csv(groups)
     << "```\n\n![JSD vs score](report_scatter.svg)\n";
  write_text(ws.reports_dir() / "report.md", md.str());
  write_text(ws.reports_dir() / "report_scatter.svg", scatter(groups, metric));
  out << md.str();
  return 0;
}

// ---- recommend ------------------------------------------------------------

struct RecommendArgs {
  std::string target;
  std::string test;
  std::string mode = "in-domain";
  std::string budget = "limited";
  std::size_t target_size = 0;
  std::vector<std::size_t> aux_sizes;
  std::vector<std::string> jsd;
  std::size_t pretrain_threshold = 50000;
  std::size_t large_threshold = 25000;
};

int cmd_recommend(const Globals& g, const RecommendArgs& a, std::ostream& out) {
  RecommendRequest req;
  req.mode = parse_mode(a.mode);
  req.budget = parse_compute_budget(a.budget);
  req.pretrain_threshold = a.pretrain_threshold;
  req.large_threshold = a.large_threshold;
  req.target_size = a.target_size;
  req.aux_sizes = a.aux_sizes;
  for (const auto& kv : a.jsd) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kConfig, "--jsd expects domain=value");
    req.jsd_to_test[DomainId(kv.substr(0, eq))] = std::stod(kv.substr(eq + 1));
  }
  if (!a.target.empty()) {
    // sizes and divergences from the workspace, unless given explicitly
    const Workspace ws = open_workspace(g);
    const Settings settings = load_settings(ws, g);
    const LangPair lang = ws.active_lang(settings);
    const auto train = ws.load_corpora(lang, Split::kTrain);
    const DomainId target(a.target);
    const DomainId test = a.test.empty() ? target : DomainId(a.test);
    bool found = false;
    std::vector<std::size_t> aux;
    for (const auto& c : train) {
      if (c.domain() == target) {
        found = true;
        if (req.target_size == 0) req.target_size = c.size();
      } else if (!(req.mode == Mode::kOutDomain && c.domain() == test)) {
        aux.push_back(c.size());
      }
    }
    if (!found) throw Error(ErrorKind::kUnknownDomain, "no training data for domain " + a.target);
    if (req.aux_sizes.empty()) req.aux_sizes = aux;
    if (req.mode == Mode::kOutDomain && req.jsd_to_test.empty()) {
      const ParallelCorpus* test_corpus = nullptr;
      const auto tests = ws.load_corpora(lang, Split::kTest);
      for (const auto& c : tests) {
        if (c.domain() == test) test_corpus = &c;
      }
      if (test_corpus == nullptr) throw Error(ErrorKind::kUnknownDomain, "no test split for " + test.name());
      for (const auto& c : train) {
        if (c.domain() == test) continue;
        req.jsd_to_test[c.domain()] = corpus_jsd(c, *test_corpus, settings.side_policy, settings.stopwords);
      }
    }
  }
  const Recommendation rec = recommend(req);
  out << "rule: " << rec.rule << "\n";
  out << "strategy: " << to_string(rec.strategy) << "\n";
  if (rec.final_domain) out << "final_domain: " << rec.final_domain->name() << "\n";
  out << "pretraining_allowed: " << (rec.pretraining_allowed ? "yes" : "no") << "\n";
  out << "confidence: " << rec.confidence << "\n";
  out << "rationale: " << rec.rationale << "\n";
  for (const auto& [d, v] : req.jsd_to_test) out << "jsd_to_test: " << d.name() << "=" << fixed(v) << "\n";
  for (const auto& w : rec.warnings) out << "warning: " << w << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain-adaptation experiment toolkit for low-resource translation", "domaincraft"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--workspace", g.workspace, "workspace directory (default: $DOMAINCRAFT_WORKSPACE or .)");
  auto* seed_opt = app.add_option("--seed", g.seed, "override every derived seed");
  app.add_option("--set", g.sets, "override a setting, key=value (repeatable)");

  std::string domain, lang, split = "train", src, tgt, tsv;
  auto* ingest = app.add_subcommand("ingest", "add a parallel corpus to the workspace");
  ingest->add_option("--domain", domain, "domain name")->required();
  ingest->add_option("--lang", lang, "language pair, e.g. en-si")->required();
  ingest->add_option("--split", split, "train, dev or test");
  ingest->add_option("--src", src, "source-side text file");
  ingest->add_option("--tgt", tgt, "target-side text file");
  ingest->add_option("--tsv", tsv, "two-column tab-separated file");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate synthetic domains");
  synth->add_option("--domains", sa.domains, "domain names")->delimiter(',')->required();
  synth->add_option("--overlaps", sa.overlaps, "core-vocabulary share per domain")->delimiter(',');
  synth->add_option("--jsd", sa.jsd, "calibrate each domain to this JSD from a fully shared one")->delimiter(',');
  synth->add_option("--vocab", sa.vocab, "vocabulary size per domain");
  synth->add_option("--train-size", sa.train_size);
  synth->add_option("--dev-size", sa.dev_size);
  synth->add_option("--test-size", sa.test_size);
  synth->add_option("--min-len", sa.min_len);
  synth->add_option("--max-len", sa.max_len);
  synth->add_option("--lang", sa.lang);

  std::string div_split = "train", side;
  auto* divergence = app.add_subcommand("divergence", "pairwise JSD between workspace corpora");
  divergence->add_option("--split", div_split, "train, dev, test or all");
  divergence->add_option("--side", side, "both, source or target");

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "compile strategies into schedules");
  plan->add_option("--strategy", pa.strategies, "strategy name(s)")->delimiter(',')->required();
  plan->add_option("--mode", pa.mode, "in-domain or out-domain");
  plan->add_option("--target", pa.target, "final-stage domain")->required();
  plan->add_option("--test", pa.test, "test domain (out-domain)");
  plan->add_option("--intermediate", pa.intermediate, "intermediate domain(s)")->delimiter(',');
  plan->add_option("--im-size", pa.im_sizes, "auxiliary size(s) per domain")->delimiter(',');
  plan->add_option("--fi-size", pa.fi_sizes, "target size(s)")->delimiter(',');
  plan->add_flag("--upsample", pa.upsample, "upsample domains smaller than the requested size");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train and evaluate a planned schedule");
  train->add_option("--schedule", ta.schedule, "schedule id");
  train->add_option("--manifest", ta.manifest, "re-run from a run manifest");
  train->add_option("--epochs", ta.epochs);
  train->add_option("--lr", ta.lr);
  train->add_option("--batch-size", ta.batch_size);

  std::string eval_id, eval_tok;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a trained run");
  evaluate_cmd->add_option("--schedule", eval_id, "schedule id")->required();
  evaluate_cmd->add_option("--tokenizer", eval_tok, "subword or word");

  std::string metric;
  auto* analyze = app.add_subcommand("analyze", "divergence/score correlation summaries");
  analyze->add_option("--metric", metric, "spbleu or bleu");
  auto* report = app.add_subcommand("report", "ranked tables per size combination");
  report->add_option("--metric", metric, "spbleu or bleu");

  RecommendArgs ra;
  auto* rec = app.add_subcommand("recommend", "pick a strategy from data sizes and divergence");
  rec->add_option("--target", ra.target, "target domain in the workspace");
  rec->add_option("--test", ra.test, "test domain (out-domain)");
  rec->add_option("--mode", ra.mode, "in-domain or out-domain");
  rec->add_option("--budget", ra.budget, "limited or ample");
  rec->add_option("--target-size", ra.target_size);
  rec->add_option("--aux-sizes", ra.aux_sizes)->delimiter(',');
  rec->add_option("--jsd", ra.jsd, "domain=value")->delimiter(',');
  rec->add_option("--pretrain-threshold", ra.pretrain_threshold);
  rec->add_option("--large-threshold", ra.large_threshold);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "domaincraft: error: usage: " << e.what() << "\n";
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (ingest->parsed()) return cmd_ingest(g, domain, lang, split, src, tgt, tsv, out);
    if (synth->parsed()) return cmd_synth(g, sa, out);
    if (divergence->parsed()) return cmd_divergence(g, div_split, side, out);
    if (plan->parsed()) return cmd_plan(g, pa, out);
    if (train->parsed()) return cmd_train(g, ta, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(g, eval_id, eval_tok, out);
    if (analyze->parsed()) return cmd_analyze(g, metric, out);
    if (report->parsed()) return cmd_report(g, metric, out);
    if (rec->parsed()) return cmd_recommend(g, ra, out);
  } catch (const Error& e) {
    err << "domaincraft: error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "domaincraft: error: internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace domaincraft
