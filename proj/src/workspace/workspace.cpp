#include "domaincraft/workspace/workspace.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "domaincraft/error.hpp"
#include "domaincraft/tokenize.hpp"
#include "domaincraft/util/digest.hpp"

namespace fs = std::filesystem;

namespace domaincraft {
namespace {

constexpr const char* kDefaultConfig =
    "# domaincraft workspace configuration\n"
    "# Built-in defaults apply to every key left out.\n"
    "seed = 222\n"
    "train.epochs = 3\n"
    "train.lr = 3e-5\n"
    "train.batch_size = 32\n"
    "model.dropout = 0.3\n"
    "model.attention_dropout = 0.1\n";

std::optional<double> opt_double(const KeyValueConfig& c, const std::string& key) {
  return c.get_optional_double(key);
}

int as_int(const KeyValueConfig& c, const std::string& key, int fallback) {
  return static_cast<int>(c.get_int(key, fallback));
}

constexpr const char* kKnownKeys[] = {
    "seed", "lang", "model.init_seed", "model.layers", "model.heads", "model.width",
    "model.ff_width", "model.max_len", "model.dropout", "model.attention_dropout",
    "train.epochs", "train.lr", "train.batch_size", "train.seed", "train.dropout",
    "train.attention_dropout", "train.adam_beta1", "train.adam_beta2", "train.adam_epsilon",
    "train.clip_norm", "train.warmup_steps", "noise.mask_ratio", "noise.mean_span",
    "subword.vocab_size", "eval.tokenizer", "divergence.side_policy"};

void check_keys(const KeyValueConfig& c) {
  for (const auto& [key, value] : c.values()) {
    if (key.rfind("stopwords.", 0) == 0) continue;
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys)) {
      throw Error(ErrorKind::kConfig, "unknown setting '" + key + "'");
    }
  }
}

}  // namespace

Settings Settings::resolve(const KeyValueConfig& c, const fs::path& root,
                           std::optional<std::uint64_t> seed_override) {
  check_keys(c);
  Settings s;
  s.seed = static_cast<std::uint64_t>(c.get_int("seed", 222));
  s.init_seed = static_cast<std::uint64_t>(c.get_int("model.init_seed", static_cast<long long>(s.seed)));

  ModelConfig& m = s.model;
  m.layers = as_int(c, "model.layers", m.layers);
  m.heads = as_int(c, "model.heads", m.heads);
  m.width = as_int(c, "model.width", m.width);
  m.ff_width = as_int(c, "model.ff_width", m.ff_width);
  m.max_len = as_int(c, "model.max_len", m.max_len);
  m.dropout = c.get_double("model.dropout", m.dropout);
  m.attention_dropout = c.get_double("model.attention_dropout", m.attention_dropout);

  TrainConfig& t = s.train;
  t.epochs = as_int(c, "train.epochs", t.epochs);
  t.learning_rate = c.get_double("train.lr", t.learning_rate);
  t.batch_size = as_int(c, "train.batch_size", t.batch_size);
  t.seed = static_cast<std::uint64_t>(c.get_int("train.seed", static_cast<long long>(s.seed)));
  t.dropout = opt_double(c, "train.dropout");
  t.attention_dropout = opt_double(c, "train.attention_dropout");
  t.adam_beta1 = c.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = c.get_double("train.adam_beta2", t.adam_beta2);
  t.adam_epsilon = c.get_double("train.adam_epsilon", t.adam_epsilon);
  t.clip_norm = c.get_double("train.clip_norm", t.clip_norm);
  t.warmup_steps = as_int(c, "train.warmup_steps", t.warmup_steps);

  s.noise.mask_ratio = c.get_double("noise.mask_ratio", s.noise.mask_ratio);
  s.noise.mean_span = c.get_double("noise.mean_span", s.noise.mean_span);

  s.subword_vocab = as_int(c, "subword.vocab_size", s.subword_vocab);
  s.tokenizer = parse_bleu_tokenizer(c.get_string("eval.tokenizer", "subword"));
  s.side_policy = parse_side_policy(c.get_string("divergence.side_policy", "both"));
  if (const auto lang = c.get("lang")) s.lang = LangPair::parse(*lang);

  for (const auto& [lang, file] : c.section("stopwords")) {
    fs::path p = file;
    if (p.is_relative()) p = root / p;
    s.stopwords[lang] = load_stopwords(p);
    s.stopword_files[lang] = p.string();
  }

  if (seed_override) {
    s.seed = *seed_override;
    s.init_seed = *seed_override;
    s.train.seed = *seed_override;
  }
  ModelConfig shape = s.model;
  shape.vocab_size = 8;  // real size comes from the subword model
  shape.validate();
  s.train.validate();
  s.noise.validate();
  return s;
}

fs::path Workspace::locate(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return fs::path(*flag);
  if (const char* env = std::getenv(kWorkspaceEnv); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return fs::current_path();
}

Workspace Workspace::open(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::kIo, "workspace " + root.string() + " does not exist");
  }
  return Workspace(root);
}

Workspace Workspace::create(const fs::path& root) {
  fs::create_directories(root / "corpora");
  Workspace ws(root);
  if (!fs::exists(ws.config_path())) {
    std::ofstream out(ws.config_path());
    out << kDefaultConfig;
  }
  return ws;
}

KeyValueConfig Workspace::config() const {
  if (!fs::exists(config_path())) return {};
  return KeyValueConfig::load(config_path());
}

std::vector<CorpusFiles> Workspace::list_corpora() const {
  std::vector<CorpusFiles> out;
  if (!fs::is_directory(corpora_dir())) return out;
  std::vector<fs::path> lang_dirs;
  for (const auto& e : fs::directory_iterator(corpora_dir())) {
    if (e.is_directory()) lang_dirs.push_back(e.path());
  }
  std::sort(lang_dirs.begin(), lang_dirs.end());
  for (const auto& ld : lang_dirs) {
    const LangPair lang = LangPair::parse(ld.filename().string());
    std::vector<fs::path> domain_dirs;
    for (const auto& e : fs::directory_iterator(ld)) {
      if (e.is_directory()) domain_dirs.push_back(e.path());
    }
    std::sort(domain_dirs.begin(), domain_dirs.end());
    for (const auto& dd : domain_dirs) {
      const DomainId domain(dd.filename().string());
      for (const Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
        const std::string stem(to_string(split));
        const auto src = dd / (stem + ".src.txt");
        const auto tgt = dd / (stem + ".tgt.txt");
        const auto tsv = dd / (stem + ".tsv");
        if (fs::exists(src) && fs::exists(tgt)) {
          out.push_back({lang, domain, split, {src, tgt}});
        } else if (fs::exists(tsv)) {
          out.push_back({lang, domain, split, {tsv}});
        } else if (fs::exists(src) || fs::exists(tgt)) {
          throw Error(ErrorKind::kAlignment, "incomplete corpus in " + dd.string() +
                                                 ": need both " + stem + ".src.txt and " +
                                                 stem + ".tgt.txt");
        }
      }
    }
  }
  return out;
}

std::vector<ParallelCorpus> Workspace::load_corpora(const std::optional<LangPair>& lang,
                                                    const std::optional<Split>& split) const {
  std::vector<ParallelCorpus> out;
  for (const auto& f : list_corpora()) {
    if (lang && !(f.lang == *lang)) continue;
    if (split && f.split != *split) continue;
    auto loaded = f.files.size() == 2 ? load_parallel(f.files[0], f.files[1], f.domain, f.lang, f.split)
                                      : load_tsv(f.files[0], f.domain, f.lang, f.split);
    out.push_back(std::move(loaded.corpus));
  }
  return out;
}

void Workspace::write_corpus(const ParallelCorpus& corpus) const {
  const auto dir = corpora_dir() / corpus.lang().str() / corpus.domain().name();
  fs::create_directories(dir);
  const std::string stem(to_string(corpus.split()));
  fs::remove(dir / (stem + ".tsv"));
  save_parallel(corpus, dir / (stem + ".src.txt"), dir / (stem + ".tgt.txt"));
}

std::string Workspace::corpora_digest(const std::vector<CorpusFiles>& files) const {
  std::string acc;
  for (const auto& f : files) {
    for (const auto& p : f.files) {
      acc += fs::relative(p, root_).generic_string() + "=" + sha256_file(p) + "\n";
    }
  }
  return sha256_hex(acc);
}

LangPair Workspace::active_lang(const Settings& settings) const {
  if (settings.lang) return *settings.lang;
  std::set<LangPair> langs;
  for (const auto& f : list_corpora()) langs.insert(f.lang);
  if (langs.empty()) throw Error(ErrorKind::kIo, "workspace has no corpora");
  if (langs.size() > 1) {
    throw Error(ErrorKind::kConfig, "several language pairs present; set lang = xx-yy");
  }
  return *langs.begin();
}

SubwordModel Workspace::subword(const Settings& settings) const {
  if (fs::exists(subword_path())) return SubwordModel::load(subword_path());
  const auto train = load_corpora(std::nullopt, Split::kTrain);
  if (train.empty()) throw Error(ErrorKind::kIo, "no training corpora to learn subwords from");
  auto model = train_bpe(train, settings.subword_vocab);
  model.save(subword_path());
  return model;
}

void Workspace::invalidate_subword() const { fs::remove(subword_path()); }

}  // namespace domaincraft
