#include "domaincraft/workspace/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "domaincraft/error.hpp"
#include "domaincraft/experiment.hpp"
#include "domaincraft/util/digest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace domaincraft {
namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

json dataset_json(const DatasetSpec& d) {
  json comps = json::array();
  for (const auto& c : d.components) {
    comps.push_back({{"domain", c.domain.name()}, {"size", c.size}, {"upsample", c.upsample}});
  }
  return {{"components", comps}, {"seed", d.seed}};
}

DatasetSpec dataset_from(const json& j) {
  DatasetSpec d;
  d.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& c : j.at("components")) {
    d.components.push_back({DomainId(c.at("domain").get<std::string>()),
                            c.at("size").get<std::size_t>(), c.value("upsample", false)});
  }
  return d;
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.learning_rate},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"dropout", opt(c.dropout)},
          {"attention_dropout", opt(c.attention_dropout)},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"clip_norm", c.clip_norm},
          {"warmup_steps", c.warmup_steps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropout = opt_from(j, "dropout");
  c.attention_dropout = opt_from(j, "attention_dropout");
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.warmup_steps = j.value("warmup_steps", 0);
  return c;
}

json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},       {"heads", c.heads},
          {"width", c.width},         {"ff_width", c.ff_width},
          {"max_len", c.max_len},     {"dropout", c.dropout},
          {"attention_dropout", c.attention_dropout}, {"vocab_size", c.vocab_size}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.width = j.at("width").get<int>();
  c.ff_width = j.at("ff_width").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.attention_dropout = j.at("attention_dropout").get<double>();
  c.vocab_size = j.value("vocab_size", 0);
  return c;
}

json to_json(const NoiseConfig& c) {
  return {{"mask_ratio", c.mask_ratio}, {"mean_span", c.mean_span}};
}

NoiseConfig noise_config_from_json(const json& j) {
  NoiseConfig c;
  c.mask_ratio = j.at("mask_ratio").get<double>();
  c.mean_span = j.at("mean_span").get<double>();
  return c;
}

json to_json(const Schedule& s) {
  json stages = json::array();
  for (const auto& st : s.stages) {
    json js = {{"data", dataset_json(st.data)},
               {"objective", std::string(to_string(st.objective))}};
    if (st.train) js["train"] = to_json(*st.train);
    stages.push_back(js);
  }
  json j = {{"id", s.id},
            {"strategy", std::string(to_string(s.strategy))},
            {"mode", std::string(to_string(s.mode))},
            {"stages", stages},
            {"test", {{"domain", s.test.domain.name()},
                      {"split", std::string(to_string(s.test.split))}}},
            {"im_size", s.im_size},
            {"fi_size", s.fi_size}};
  j["lang"] = s.lang ? json(s.lang->str()) : json(nullptr);
  return j;
}

Schedule schedule_from_json(const json& j) {
  try {
    Schedule s;
    s.id = j.at("id").get<std::string>();
    s.strategy = parse_strategy(j.at("strategy").get<std::string>());
    s.mode = parse_mode(j.at("mode").get<std::string>());
    for (const auto& st : j.at("stages")) {
      Stage stage;
      stage.data = dataset_from(st.at("data"));
      stage.objective = parse_objective(st.at("objective").get<std::string>());
      if (st.contains("train")) stage.train = train_config_from_json(st.at("train"));
      s.stages.push_back(std::move(stage));
    }
    s.test.domain = DomainId(j.at("test").at("domain").get<std::string>());
    s.test.split = parse_split(j.at("test").at("split").get<std::string>());
    s.im_size = j.at("im_size").get<std::size_t>();
    s.fi_size = j.at("fi_size").get<std::size_t>();
    if (j.contains("lang") && !j.at("lang").is_null()) {
      s.lang = LangPair::parse(j.at("lang").get<std::string>());
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kManifest, std::string("malformed schedule: ") + e.what());
  }
}

void save_schedule(const Workspace& ws, const Schedule& schedule) {
  write_file(ws.schedules_dir() / (schedule.id + ".json"), to_json(schedule).dump(2) + "\n");
}

bool has_schedule(const Workspace& ws, const std::string& id) {
  return fs::exists(ws.schedules_dir() / (id + ".json"));
}

Schedule load_schedule(const Workspace& ws, const std::string& id) {
  const auto path = ws.schedules_dir() / (id + ".json");
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kValidation, "no planned schedule '" + id + "'; run plan first");
  }
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kManifest, path.string() + ": " + e.what());
  }
  return schedule_from_json(j);
}

json RunManifest::to_json() const {
  json logs = json::array();
  for (const auto& stage : stage_logs) {
    json l = json::array();
    for (const auto& e : stage) l.push_back({{"epoch", e.epoch}, {"loss", e.mean_loss}, {"batches", e.batches}});
    logs.push_back(l);
  }
  return {
      {"version", version},
      {"toolkit_version", toolkit_version},
      {"schedule", domaincraft::to_json(schedule)},
      {"seeds", {{"data", data_seed}, {"init", init_seed}, {"train", train_seed}}},
      {"settings",
       {{"model", domaincraft::to_json(model)},
        {"train", domaincraft::to_json(train)},
        {"noise", domaincraft::to_json(noise)},
        {"tokenizer", std::string(domaincraft::to_string(tokenizer))},
        {"side_policy", std::string(domaincraft::to_string(side_policy))},
        {"subword_vocab", subword_vocab},
        {"stopwords", stopword_files}}},
      {"hashes",
       {{"settings_sha256", settings_sha256},
        {"config_file_sha256", config_file_sha256},
        {"subword_sha256", subword_sha256},
        {"corpora", corpus_digests}}},
      {"timestamps", {{"started", started}, {"finished", finished}}},
      {"outputs",
       {{"checkpoint", checkpoint},
        {"hypotheses", hypotheses},
        {"metric", metric},
        {"score", score},
        {"jsd_final_to_test", jsd_final_to_test},
        {"stage_logs", logs}}},
  };
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) {
      throw Error(ErrorKind::kManifest, "manifest version " + std::to_string(m.version) +
                                            " does not match supported version " +
                                            std::to_string(kManifestVersion));
    }
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.schedule = schedule_from_json(j.at("schedule"));
    const auto& seeds = j.at("seeds");
    m.data_seed = seeds.at("data").get<std::uint64_t>();
    m.init_seed = seeds.at("init").get<std::uint64_t>();
    m.train_seed = seeds.at("train").get<std::uint64_t>();
    const auto& st = j.at("settings");
    m.model = model_config_from_json(st.at("model"));
    m.train = train_config_from_json(st.at("train"));
    m.noise = noise_config_from_json(st.at("noise"));
    m.tokenizer = parse_bleu_tokenizer(st.at("tokenizer").get<std::string>());
    m.side_policy = parse_side_policy(st.at("side_policy").get<std::string>());
    m.subword_vocab = st.at("subword_vocab").get<int>();
    m.stopword_files = st.at("stopwords").get<std::map<std::string, std::string>>();
    const auto& h = j.at("hashes");
    m.settings_sha256 = h.at("settings_sha256").get<std::string>();
    m.config_file_sha256 = h.at("config_file_sha256").get<std::string>();
    m.subword_sha256 = h.at("subword_sha256").get<std::string>();
    m.corpus_digests = h.at("corpora").get<std::map<std::string, std::string>>();
    m.started = j.at("timestamps").at("started").get<std::string>();
    m.finished = j.at("timestamps").at("finished").get<std::string>();
    const auto& o = j.at("outputs");
    m.checkpoint = o.at("checkpoint").get<std::string>();
    m.hypotheses = o.at("hypotheses").get<std::string>();
    m.metric = o.at("metric").get<std::string>();
    m.score = o.at("score").get<double>();
    m.jsd_final_to_test = o.at("jsd_final_to_test").get<double>();
    for (const auto& stage : o.at("stage_logs")) {
      std::vector<EpochLog> log;
      for (const auto& e : stage) {
        log.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(),
                       e.at("batches").get<std::size_t>()});
      }
      m.stage_logs.push_back(std::move(log));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kManifest, std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::kManifest, "no manifest at " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kManifest, path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunManifest::save(const fs::path& path) const { write_file(path, to_json().dump(2) + "\n"); }

std::string settings_digest(const ModelConfig& model, const TrainConfig& train,
                            const NoiseConfig& noise, BleuTokenizer tokenizer,
                            SidePolicy side_policy) {
  std::string text = describe(model) + "\n" + describe(train) + "\n" + describe(noise) + "\n" +
                     std::string(to_string(tokenizer)) + "\n" + std::string(to_string(side_policy));
  return sha256_hex(text);
}

std::map<std::string, std::string> corpus_digests(const Workspace& ws) {
  std::map<std::string, std::string> out;
  for (const auto& f : ws.list_corpora()) {
    for (const auto& p : f.files) out[fs::relative(p, ws.root()).generic_string()] = sha256_file(p);
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace domaincraft
