#include "domaincraft/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "domaincraft/error.hpp"

namespace domaincraft {
namespace {

constexpr char kMagic[8] = {'D', 'C', 'R', 'F', 'T', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::kCheckpoint, "truncated checkpoint");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParams& params) {
  const ModelConfig& c = params.config;
  const ParamLayout layout(c);
  if (params.values.size() != layout.total()) {
    throw Error(ErrorKind::kCheckpoint, "parameter buffer does not match its config");
  }
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const int v : {c.layers, c.heads, c.width, c.ff_width, c.max_len, c.vocab_size}) {
    put<std::int32_t>(out, v);
  }
  put<double>(out, c.dropout);
  put<double>(out, c.attention_dropout);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layout.tensors().size()));
  for (const auto& t : layout.tensors()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
    out.append(reinterpret_cast<const char*>(params.values.data() + t.offset),
               t.size() * sizeof(double));
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

ModelParams deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 ||
      bytes.substr(0, sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(ErrorKind::kCheckpoint, "not a checkpoint file");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (stored != fnv1a(body)) throw Error(ErrorKind::kCheckpoint, "checksum mismatch");

  Reader r(body);
  r.take(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kCheckpoint, "unsupported checkpoint version " +
                                            std::to_string(version));
  }
  ModelConfig c;
  c.layers = r.get<std::int32_t>();
  c.heads = r.get<std::int32_t>();
  c.width = r.get<std::int32_t>();
  c.ff_width = r.get<std::int32_t>();
  c.max_len = r.get<std::int32_t>();
  c.vocab_size = r.get<std::int32_t>();
  c.dropout = r.get<double>();
  c.attention_dropout = r.get<double>();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kCheckpoint, std::string("bad config block: ") + e.what());
  }
  const ParamLayout layout(c);
  const auto count = r.get<std::uint32_t>();
  if (count != layout.tensors().size()) {
    throw Error(ErrorKind::kCheckpoint, "tensor count does not match config");
  }
  ModelParams params{c, std::vector<double>(layout.total())};
  for (const auto& t : layout.tensors()) {
    const auto name = r.take(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != t.name || rows != static_cast<std::uint32_t>(t.rows) ||
        cols != static_cast<std::uint32_t>(t.cols)) {
      throw Error(ErrorKind::kCheckpoint, "unexpected tensor '" + std::string(name) + "' " +
                                              std::to_string(rows) + "x" + std::to_string(cols));
    }
    const auto data = r.take(t.size() * sizeof(double));
    std::memcpy(params.values.data() + t.offset, data.data(), data.size());
  }
  if (!r.done()) throw Error(ErrorKind::kCheckpoint, "trailing bytes in checkpoint");
  if (!params.all_finite()) throw Error(ErrorKind::kCheckpoint, "checkpoint holds non-finite values");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(params);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace domaincraft
