#include "domaincraft/workspace/results.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <sstream>

#include "domaincraft/error.hpp"
#include "domaincraft/strategy.hpp"

namespace domaincraft {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw Error(ErrorKind::kResults, "field '" + s + "' cannot be stored in the results csv");
  }
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", score);
  return buf;
}

std::vector<ResultRow> parse_rows(const std::string& text, const std::string& origin) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      if (line != kResultsHeader) {
        throw Error(ErrorKind::kResults, origin + ": unexpected header '" + line + "'");
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    rows.push_back(ResultRow::parse(line));
  }
  return rows;
}

class FileLock {
 public:
  explicit FileLock(int fd) : fd_(fd) {
    if (::flock(fd_, LOCK_EX) != 0) throw Error(ErrorKind::kIo, "cannot lock results store");
  }
  ~FileLock() { ::flock(fd_, LOCK_UN); }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

std::string read_fd(int fd) {
  std::string text;
  char buf[8192];
  ::lseek(fd, 0, SEEK_SET);
  for (;;) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) throw Error(ErrorKind::kIo, "cannot read results store");
    if (n == 0) break;
    text.append(buf, static_cast<std::size_t>(n));
  }
  return text;
}

void write_all(int fd, const std::string& text) {
  std::size_t off = 0;
  while (off < text.size()) {
    const ssize_t n = ::write(fd, text.data() + off, text.size() - off);
    if (n <= 0) throw Error(ErrorKind::kIo, "cannot write results store");
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string ResultRow::line() const {
  for (const auto* f : {&schedule_id, &strategy, &mode, &test_domain, &metric, &score}) {
    check_field(*f);
  }
  return schedule_id + "," + strategy + "," + mode + "," + test_domain + "," +
         std::to_string(im_size) + "," + std::to_string(fi_size) + "," + metric + "," + score;
}

ResultRow ResultRow::parse(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 8) throw Error(ErrorKind::kResults, "malformed results row '" + line + "'");
  try {
    ResultRow r{f[0], f[1], f[2], f[3], std::stoul(f[4]), std::stoul(f[5]), f[6], f[7]};
    (void)r.score_value();
    return r;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::kResults, "malformed results row '" + line + "'");
  }
}

ResultRow to_row(const RunResult& r) {
  return {r.schedule_id,
          std::string(to_string(r.strategy)),
          std::string(to_string(r.mode)),
          r.test_domain.name(),
          r.im_size,
          r.fi_size,
          r.metric,
          format_score(r.score)};
}

std::vector<ResultRow> ResultsStore::read() const {
  const int fd = ::open(path_.c_str(), O_RDONLY);
  if (fd < 0) return {};
  std::string text;
  {
    const int shared = ::flock(fd, LOCK_SH);
    text = read_fd(fd);
    if (shared == 0) ::flock(fd, LOCK_UN);
  }
  ::close(fd);
  return parse_rows(text, path_.string());
}

bool ResultsStore::append(const ResultRow& row) const {
  const std::string line = row.line();
  if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorKind::kIo, "cannot open " + path_.string());
  bool appended = false;
  try {
    FileLock lock(fd);
    const std::string text = read_fd(fd);
    for (const auto& existing : parse_rows(text, path_.string())) {
      if (existing.schedule_id != row.schedule_id || existing.metric != row.metric) continue;
      if (existing == row) {
        ::close(fd);
        return false;
      }
      throw Error(ErrorKind::kResults, "schedule '" + row.schedule_id +
                                           "' already has a different " + row.metric +
                                           " row (" + existing.score + " vs " + row.score + ")");
    }
    std::string out;
    if (text.empty()) out = std::string(kResultsHeader) + "\n";
    else if (text.back() != '\n') out = "\n";
    out += line + "\n";
    write_all(fd, out);
    appended = true;
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  return appended;
}

}  // namespace domaincraft
