#include <doctest.h>

#include <cstdlib>

#include "domaincraft/error.hpp"
#include "domaincraft/strategy.hpp"
#include "domaincraft/workspace/config.hpp"
#include "domaincraft/workspace/manifest.hpp"
#include "domaincraft/workspace/results.hpp"
#include "domaincraft/workspace/svg.hpp"
#include "domaincraft/workspace/workspace.hpp"
#include "helpers.hpp"

using namespace domaincraft;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kValidation;
}

ResultRow row(const std::string& id, const std::string& score, const std::string& metric = "bleu") {
  return {id, "vanilla-ft", "in-domain", "a", 0, 1000, metric, score};
}

}  // namespace

TEST_CASE("key-value config") {
  const auto c = KeyValueConfig::parse(
      "# comment\n"
      "seed = 7   # trailing\n"
      "\n"
      "  train.lr=0.5\n"
      "stopwords.si = sw/si.txt\n"
      "flag = yes\n");
  CHECK(c.get_int("seed", 0) == 7);
  CHECK(c.get_double("train.lr", 0) == 0.5);
  CHECK(c.get_int("missing", 3) == 3);
  CHECK(c.get_bool("flag", false));
  CHECK(c.section("stopwords") == std::map<std::string, std::string>{{"si", "sw/si.txt"}});
  CHECK(kind_of([] { KeyValueConfig::parse("no equals sign\n"); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { KeyValueConfig::parse(" = 3\n"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { c.get_int("train.lr", 0); }) == ErrorKind::kConfig);
  // str() round-trips
  CHECK(KeyValueConfig::parse(c.str()).values() == c.values());
}

TEST_CASE("settings precedence") {
  testutil::TempDir dir;
  const Settings builtin = Settings::resolve(KeyValueConfig{}, dir.path());
  CHECK(builtin.seed == 222);
  CHECK(builtin.train.epochs == 3);
  CHECK(builtin.train.learning_rate == 3e-5);
  CHECK(builtin.train.batch_size == 32);
  CHECK(builtin.model.dropout == 0.3);
  CHECK(builtin.model.attention_dropout == 0.1);

  KeyValueConfig file = KeyValueConfig::parse("train.epochs = 5\nseed = 9\ntrain.lr = 1e-3\n");
  const Settings from_file = Settings::resolve(file, dir.path());
  CHECK(from_file.train.epochs == 5);
  CHECK(from_file.seed == 9);
  CHECK(from_file.train.seed == 9);
  CHECK(from_file.init_seed == 9);

  file.set("train.epochs", "8");  // a command-line flag lands here
  const Settings flagged = Settings::resolve(file, dir.path(), 11);
  CHECK(flagged.train.epochs == 8);
  CHECK(flagged.train.learning_rate == 1e-3);
  CHECK(flagged.seed == 11);
  CHECK(flagged.init_seed == 11);
  CHECK(flagged.train.seed == 11);

  CHECK(kind_of([&] { Settings::resolve(KeyValueConfig::parse("train.epoch = 2\n"), dir.path()); }) ==
        ErrorKind::kConfig);
  CHECK_THROWS_AS(Settings::resolve(KeyValueConfig::parse("model.heads = 3\n"), dir.path()), Error);
  CHECK_THROWS_AS(Settings::resolve(KeyValueConfig::parse("eval.tokenizer = chars\n"), dir.path()), Error);
}

TEST_CASE("workspace layout") {
  testutil::TempDir dir;
  const auto root = dir / "ws";
  CHECK(kind_of([&] { Workspace::open(root); }) == ErrorKind::kIo);
  const Workspace ws = Workspace::create(root);
  CHECK(std::filesystem::exists(ws.config_path()));
  CHECK(Settings::resolve(ws.config(), root).train.epochs == 3);

  ws.write_corpus(testutil::numbered("a", 5));
  ws.write_corpus(testutil::corpus("a", {{"x y", "z"}}, Split::kTest));
  const auto files = ws.list_corpora();
  REQUIRE(files.size() == 2);
  const auto loaded = ws.load_corpora();
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].pairs() == testutil::numbered("a", 5).pairs());
  const auto d1 = corpus_digests(ws);
  ws.write_corpus(testutil::numbered("a", 6));
  CHECK(corpus_digests(ws) != d1);

  CHECK(Workspace::locate(std::string("/tmp/x")) == "/tmp/x");
  ::setenv(kWorkspaceEnv, root.c_str(), 1);
  CHECK(Workspace::locate(std::nullopt) == root);
  ::unsetenv(kWorkspaceEnv);
  CHECK(Workspace::locate(std::nullopt) == std::filesystem::current_path());
}

TEST_CASE("results store") {
  testutil::TempDir dir;
  const ResultsStore store(dir / "results.csv");
  CHECK(store.read().empty());
  CHECK(store.append(row("s1", "12.3400")));
  CHECK(store.append(row("s2", "1.0000")));
  CHECK(store.append(row("s1", "20.0000", "spbleu")));
  const std::string before = testutil::read(dir / "results.csv");
  CHECK(before.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  // identical row: no-op
  CHECK_FALSE(store.append(row("s1", "12.3400")));
  CHECK(testutil::read(dir / "results.csv") == before);
  // never overwritten
  CHECK(kind_of([&] { store.append(row("s1", "12.3500")); }) == ErrorKind::kResults);
  CHECK(testutil::read(dir / "results.csv") == before);
  const auto rows = store.read();
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == row("s1", "12.3400"));
  CHECK(ResultRow::parse(rows[2].line()) == rows[2]);

  RunResult r;
  r.schedule_id = "x";
  r.strategy = Strategy::kMultiDomainITTL;
  r.score = 33.333333;
  r.metric = "spbleu";
  CHECK(to_row(r).score == "33.3333");
  CHECK(to_row(r).strategy == "multi-domain-ittl");
  CHECK_THROWS_AS(ResultRow::parse("a,b,c"), Error);
  r.schedule_id = "with,comma";
  CHECK_THROWS_AS(to_row(r).line(), Error);
}

TEST_CASE("manifests") {
  testutil::TempDir dir;
  const Workspace ws = Workspace::create(dir / "ws");
  ScheduleRequest rq;
  rq.strategy = Strategy::kMultiDomainITTL;
  rq.mode = Mode::kInDomain;
  rq.domains = {{DomainId("a"), 2000}, {DomainId("b"), 2000}};
  rq.final_domain = DomainId("a");
  rq.test_domain = DomainId("a");
  rq.im_size = 1000;
  rq.fi_size = 500;
  const Schedule s = build_schedule(rq);
  CHECK(schedule_from_json(to_json(s)) == s);
  save_schedule(ws, s);
  CHECK(has_schedule(ws, s.id));
  CHECK(load_schedule(ws, s.id) == s);
  CHECK(kind_of([&] { load_schedule(ws, "nope"); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { schedule_from_json(nlohmann::json{{"id", 3}}); }) == ErrorKind::kManifest);

  RunManifest m;
  m.schedule = s;
  m.model.vocab_size = 100;
  m.train.epochs = 4;
  m.corpus_digests = {{"corpora/en-si/a/train.src.txt", "abc"}};
  m.score = 12.5;
  m.jsd_final_to_test = 0.25;
  m.stage_logs = {{{1, 2.5, 10}}, {{1, 1.5, 5}}};
  m.started = utc_timestamp();
  m.save(dir / "m.json");
  const RunManifest back = RunManifest::load(dir / "m.json");
  CHECK(back.to_json() == m.to_json());
  CHECK(back.schedule == s);
  CHECK(back.train == m.train);

  auto j = m.to_json();
  j["version"] = kManifestVersion + 1;
  CHECK(kind_of([&] { RunManifest::from_json(j); }) == ErrorKind::kManifest);
  testutil::write(dir / "bad.json", "{ not json");
  CHECK(kind_of([&] { RunManifest::load(dir / "bad.json"); }) == ErrorKind::kManifest);
  CHECK(kind_of([&] { RunManifest::load(dir / "missing.json"); }) == ErrorKind::kManifest);

  const Settings st = Settings::resolve(KeyValueConfig{}, dir.path());
  const auto d = settings_digest(st.model, st.train, st.noise, st.tokenizer, st.side_policy);
  CHECK(d.size() == 64);
  TrainConfig t2 = st.train;
  t2.epochs += 1;
  CHECK(settings_digest(st.model, t2, st.noise, st.tokenizer, st.side_policy) != d);
}

TEST_CASE("svg output is byte-stable") {
  ScatterPlot p{"t", "x", "y", {{"a", {0.1, 0.5, 0.9}, {30, 20, 5}, true}, {"b & c", {0.2}, {10}, true}}};
  const std::string one = render_scatter(p);
  CHECK(one == render_scatter(p));
  CHECK(one.rfind("<svg", 0) == 0);
  CHECK(one.find("b &amp; c") != std::string::npos);
  CHECK(one.find("stroke-dasharray") != std::string::npos);
  const std::string h = render_heatmap("m", {"a", "b"}, {{0, 0.5}, {0.5, 0}});
  CHECK(h == render_heatmap("m", {"a", "b"}, {{0, 0.5}, {0.5, 0}}));
}
