#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "domaincraft/corpus.hpp"
#include "domaincraft/error.hpp"
#include "helpers.hpp"

using namespace domaincraft;

namespace {

std::multiset<std::pair<std::string, std::string>> bag(const ParallelCorpus& c) {
  std::multiset<std::pair<std::string, std::string>> out;
  for (const auto& p : c.pairs()) out.insert({p.source, p.target});
  return out;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("load_parallel: three aligned lines") {
  testutil::TempDir dir;
  testutil::write(dir / "a.src", "one\ntwo\nthree\n");
  testutil::write(dir / "a.tgt", "eka\ndeka\nthuna\n");
  const auto loaded = load_parallel(dir / "a.src", dir / "a.tgt", DomainId("pmi"), LangPair::parse("en-si"),
                                    Split::kTrain);
  REQUIRE(loaded.corpus.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(loaded.corpus[i].index == i);
  CHECK(loaded.corpus[1].source == "two");
  CHECK(loaded.corpus[2].target == "thuna");
  CHECK(loaded.report.dropped == 0);
}

TEST_CASE("load_parallel: blank source line is dropped and counted") {
  testutil::TempDir dir;
  testutil::write(dir / "a.src", "a\nb\n   \nd\ne\n");
  testutil::write(dir / "a.tgt", "1\n2\n3\n4\n5\n");
  const auto loaded = load_parallel(dir / "a.src", dir / "a.tgt", DomainId("cc"), LangPair::parse("en-ta"),
                                    Split::kTrain);
  CHECK(loaded.corpus.size() == 4);
  CHECK(loaded.report.dropped == 1);
  CHECK(loaded.corpus[2].source == "d");
  CHECK(loaded.corpus[2].index == 2);
}

TEST_CASE("load_parallel: errors") {
  testutil::TempDir dir;
  testutil::write(dir / "a.src", "a\nb\n");
  testutil::write(dir / "a.tgt", "1\n");
  CHECK(kind_of([&] {
          load_parallel(dir / "a.src", dir / "a.tgt", DomainId("x"), LangPair::parse("en-si"), Split::kTrain);
        }) == ErrorKind::kAlignment);

  testutil::write(dir / "b.src", "fine\nbad \xff byte\n");
  testutil::write(dir / "b.tgt", "1\n2\n");
  try {
    load_parallel(dir / "b.src", dir / "b.tgt", DomainId("x"), LangPair::parse("en-si"), Split::kTrain);
    FAIL("expected an encoding error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEncoding);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("load_parallel: 25,000 lines") {
  testutil::TempDir dir;
  std::string src, tgt;
  for (int i = 0; i < 25000; ++i) {
    src += "s" + std::to_string(i) + "\n";
    tgt += "t" + std::to_string(i) + "\n";
  }
  testutil::write(dir / "a.src", src);
  testutil::write(dir / "a.tgt", tgt);
  const auto loaded = load_parallel(dir / "a.src", dir / "a.tgt", DomainId("cc"), LangPair::parse("en-si"),
                                    Split::kTrain);
  CHECK(loaded.corpus.size() == 25000);
}

TEST_CASE("tsv and parallel files round-trip") {
  testutil::TempDir dir;
  const auto c = testutil::corpus("gvt", {{"a b", "x"}, {"c", "y z"}});
  save_tsv(c, dir / "c.tsv");
  const auto back = load_tsv(dir / "c.tsv", c.domain(), c.lang(), c.split()).corpus;
  CHECK(back.pairs() == c.pairs());
  save_parallel(c, dir / "c.src", dir / "c.tgt");
  CHECK(load_parallel(dir / "c.src", dir / "c.tgt", c.domain(), c.lang(), c.split()).corpus.pairs() ==
        c.pairs());
}

TEST_CASE("sample") {
  const auto c = testutil::numbered("cc", 3000);
  SUBCASE("full sample is a permutation") {
    const auto s = sample(c, c.size(), 222);
    CHECK(bag(s) == bag(c));
  }
  SUBCASE("deterministic under a seed") {
    CHECK(sample(c, 1000, 222).pairs() == sample(c, 1000, 222).pairs());
  }
  SUBCASE("other seed differs, still a sub-multiset") {
    const auto a = sample(c, 1000, 222);
    const auto b = sample(c, 1000, 223);
    CHECK_FALSE(a.pairs() == b.pairs());
    const auto all = bag(c);
    for (const auto* s : {&a, &b}) {
      const auto sb = bag(*s);
      CHECK(sb.size() == 1000);
      CHECK(std::includes(all.begin(), all.end(), sb.begin(), sb.end()));
      for (std::size_t i = 0; i < s->size(); ++i) CHECK((*s)[i].index == i);
    }
  }
  SUBCASE("too many") {
    CHECK(kind_of([&] { sample(c, 3001, 1); }) == ErrorKind::kSize);
  }
}

TEST_CASE("corpus_stats hand count") {
  const auto c = testutil::corpus("x", {{"a b", "x"}, {"a", "x y"}});
  const auto s = corpus_stats(c);
  CHECK(s.pairs == 2);
  CHECK(s.source_tokens == 3);
  CHECK(s.target_tokens == 3);
  CHECK(s.source_types == 2);
  CHECK(s.target_types == 2);
}

TEST_CASE("domain ids compare case-insensitively") {
  CHECK(DomainId("Bible") == DomainId("bible"));
  CHECK(DomainId("Bible").name() == "Bible");
  CHECK(LangPair::parse("en-si").target == "si");
  CHECK(parse_split("dev") == Split::kDev);
}
