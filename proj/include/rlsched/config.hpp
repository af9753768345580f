#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlsched/workload.hpp"

namespace rlsched {

// Flat "key = value" text with optional [section] headers. Keys are unique
// across the whole file; sections only group them. '#' starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value, const std::string& section = "");
  void write(std::ostream& out) const;
  // Stable hash of the entries, used in manifests.
  std::uint64_t hash() const;

 private:
  struct Entry {
    std::string value;
    std::string section;
  };
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

// Reads the synthetic-workload keys: cluster_size, job_count, arrival_rate,
// runtime_min, runtime_max, proc_min, proc_max, user_count.
SyntheticConfig synthetic_config_from(const KeyValueConfig& config);

}  // namespace rlsched
