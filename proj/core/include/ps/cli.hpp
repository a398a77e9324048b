#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ps {

// Plain-text key=value configuration with command-line overrides.
struct RunConfig {
  std::map<std::string, std::string> kv;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int jobs = 0;  // 0 = logical cores

  static RunConfig load(const std::filesystem::path& path);
  void merge_override(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;

  // Stable hash over the sorted key=value pairs plus the seed.
  std::uint64_t hash() const;
};

int cmd_forge(const RunConfig& cfg);
int cmd_label(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_score(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);

// Full argv-style entry point; maps errors to exit codes
// (1 usage, 2 data, 3 internal).
int run_cli(const std::vector<std::string>& args);

}  // namespace ps
