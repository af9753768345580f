#include "rlsched/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "rlsched/errors.hpp"

namespace rlsched {

namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trimmed(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ParseError("unterminated section header", line_no);
      section = trimmed(text.substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key = trimmed(text.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (cfg.has(key)) throw ParseError("duplicate key '" + key + "'", line_no);
    cfg.set(key, trimmed(text.substr(eq + 1)), section);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config not found: " + path);
  return parse(in);
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::number(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError("key '" + key + "' is not a number: '" + *v + "'");
  }
  return out;
}

long long KeyValueConfig::integer(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError("key '" + key + "' is not an integer: '" + *v + "'");
  }
  return out;
}

bool KeyValueConfig::flag(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
  throw ConfigError("key '" + key + "' is not a boolean: '" + *v + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value,
                         const std::string& section) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[key] = {value, section};
    order_.push_back(key);
  } else {
    it->second.value = value;
    if (!section.empty()) it->second.section = section;
  }
}

void KeyValueConfig::write(std::ostream& out) const {
  std::map<std::string, std::vector<std::string>> by_section;
  for (const auto& key : order_) by_section[entries_.at(key).section].push_back(key);
  bool first = true;
  for (const auto& [section, keys] : by_section) {
    if (!section.empty()) out << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& key : keys) out << key << " = " << entries_.at(key).value << '\n';
  }
}

std::uint64_t KeyValueConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const auto& [key, entry] : entries_) {
    for (char c : key + '=' + entry.value + '\n') {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

SyntheticConfig synthetic_config_from(const KeyValueConfig& config) {
  SyntheticConfig s;
  s.cluster_size = static_cast<int>(config.integer("cluster_size", s.cluster_size));
  s.job_count = static_cast<std::size_t>(config.integer("job_count", static_cast<long long>(s.job_count)));
  s.arrival_rate = config.number("arrival_rate", s.arrival_rate);
  s.runtime_min = config.integer("runtime_min", s.runtime_min);
  s.runtime_max = config.integer("runtime_max", s.runtime_max);
  s.proc_min = static_cast<int>(config.integer("proc_min", s.proc_min));
  s.proc_max = static_cast<int>(config.integer("proc_max", s.proc_max));
  s.user_count = static_cast<int>(config.integer("user_count", s.user_count));
  return s;
}

}  // namespace rlsched
