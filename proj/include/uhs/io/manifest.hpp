#pragma once

#include "uhs/io/records.hpp"

#include <chrono>
#include <set>

namespace uhs::io {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Index of every file a config produced, stored as <output>/manifest_<hash>.json. Paths are
/// relative to the output directory.
class RunManifest {
 public:
  RunManifest(fs::path output, std::string hash) : dir_(std::move(output)), hash_(std::move(hash)) {
    const fs::path p = path();
    if (fs::exists(p)) {
      const json j = json::parse(read_file(p));
      created_ = j.value("created", "");
      for (const auto& a : j.at("artifacts")) artifacts_[a.at("path").get<std::string>()] = a.at("kind");
      completed_ = j.value("completed_runs", std::set<std::string>{});
    }
    if (created_.empty()) created_ = utc_timestamp();
  }

  fs::path path() const { return dir_ / ("manifest_" + hash_ + ".json"); }
  const std::string& hash() const { return hash_; }

  void add(const fs::path& file, const std::string& kind) {
    artifacts_[fs::relative(file, dir_).generic_string()] = kind;
  }

  bool completed(const std::string& run_key) const { return completed_.count(run_key) > 0; }
  void mark_completed(const std::string& run_key) { completed_.insert(run_key); }
  const std::map<std::string, std::string>& artifacts() const { return artifacts_; }

  void save() const {
    json arts = json::array();
    for (const auto& [p, k] : artifacts_) arts.push_back({{"path", p}, {"kind", k}});
    const json j = {{"config_hash", hash_},      {"tool_version", kToolVersion}, {"created", created_},
                    {"updated", utc_timestamp()}, {"artifacts", arts},          {"completed_runs", completed_}};
    atomic_write(path(), j.dump(2));
  }

 private:
  fs::path dir_;
  std::string hash_;
  std::string created_;
  std::map<std::string, std::string> artifacts_;
  std::set<std::string> completed_;
};

}  // namespace uhs::io
