#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "domaincraft/corpus.hpp"

namespace testutil {

inline domaincraft::ParallelCorpus corpus(const std::string& domain,
                                          const std::vector<std::pair<std::string, std::string>>& pairs,
                                          domaincraft::Split split = domaincraft::Split::kTrain,
                                          const std::string& lang = "en-si") {
  std::vector<domaincraft::SentencePair> ps;
  for (std::size_t i = 0; i < pairs.size(); ++i) ps.push_back({pairs[i].first, pairs[i].second, i});
  return domaincraft::ParallelCorpus(domaincraft::DomainId(domain), domaincraft::LangPair::parse(lang),
                                     split, std::move(ps));
}

// n distinct pairs "<domain> i" -> "<domain>-t i"
inline domaincraft::ParallelCorpus numbered(const std::string& domain, std::size_t n) {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pairs.emplace_back(domain + " s" + std::to_string(i), domain + " t" + std::to_string(i));
  }
  return corpus(domain, pairs);
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("domaincraft-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testutil
