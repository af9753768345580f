#include "rlsched/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "rlsched/errors.hpp"

namespace rlsched {

namespace {

// SWF v2 column positions (0-based).
constexpr std::size_t kFieldId = 0;
constexpr std::size_t kFieldSubmit = 1;
constexpr std::size_t kFieldWait = 2;
constexpr std::size_t kFieldRun = 3;
constexpr std::size_t kFieldAllocProcs = 4;
constexpr std::size_t kFieldReqProcs = 7;
constexpr std::size_t kFieldReqTime = 8;
constexpr std::size_t kFieldUser = 11;
constexpr std::size_t kSwfFields = 18;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_number(std::string_view token, double& out) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::optional<int> parse_max_procs(std::string_view comment) {
  constexpr std::string_view key = "MaxProcs:";
  const auto pos = comment.find(key);
  if (pos == std::string_view::npos) return std::nullopt;
  const auto rest = trim(comment.substr(pos + key.size()));
  int value = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
  if (ec != std::errc() || value < 1) return std::nullopt;
  return value;
}

struct RawJob {
  Job job;
  Seconds wait = 0;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int> powers_of_two_in(int lo, int hi) {
  std::vector<int> out;
  for (long long p = 1; p <= hi; p *= 2) {
    if (p >= lo) out.push_back(static_cast<int>(p));
  }
  return out;
}

}  // namespace

Seconds JobTrace::max_requested_time() const {
  Seconds cap = 1;
  for (const auto& j : jobs) cap = std::max(cap, j.requested_time);
  return cap;
}

bool JobTrace::has_user_info() const {
  return !jobs.empty() &&
         std::none_of(jobs.begin(), jobs.end(),
                      [](const Job& j) { return j.user_id == kUnknownUser; });
}

JobSequence JobSequence::from_jobs(std::vector<Job> jobs, int cluster_size) {
  JobSequence seq;
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return a.submit_time < b.submit_time;
  });
  seq.cluster_size = cluster_size;
  for (const auto& j : jobs) seq.time_cap = std::max(seq.time_cap, j.requested_time);
  seq.jobs = std::move(jobs);
  return seq;
}

double SyntheticConfig::mean_runtime() const {
  const double a = static_cast<double>(runtime_min);
  const double b = static_cast<double>(runtime_max);
  if (b <= a) return a;
  return (b - a) / std::log(b / a);
}

double SyntheticConfig::mean_processors() const {
  const auto powers = powers_of_two_in(proc_min, std::min(proc_max, cluster_size));
  if (powers.empty()) return 0.0;
  double sum = 0.0;
  for (int p : powers) sum += p;
  return sum / static_cast<double>(powers.size());
}

JobTrace parse_swf(std::istream& in, const ParseOptions& options) {
  std::optional<int> header_size;
  std::vector<RawJob> raw;
  std::size_t dropped = 0;

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  fields.reserve(kSwfFields);
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (text.front() == ';') {
      if (auto n = parse_max_procs(text)) header_size = n;
      continue;
    }

    fields.clear();
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto start = text.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      auto stop = text.find_first_of(" \t", start);
      if (stop == std::string_view::npos) stop = text.size();
      fields.push_back(text.substr(start, stop - start));
      pos = stop;
    }
    if (fields.size() < kSwfFields) {
      throw ParseError("expected " + std::to_string(kSwfFields) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    double v[kSwfFields];
    for (std::size_t i = 0; i < kSwfFields; ++i) {
      if (!parse_number(fields[i], v[i])) {
        throw ParseError("field " + std::to_string(i + 1) + " is not a number: '" +
                             std::string(fields[i]) + "'",
                         line_no);
      }
    }

    RawJob r;
    r.job.job_id = static_cast<std::int64_t>(v[kFieldId]);
    r.job.submit_time = static_cast<Seconds>(v[kFieldSubmit]);
    r.wait = static_cast<Seconds>(v[kFieldWait]);
    r.job.actual_runtime = static_cast<Seconds>(v[kFieldRun]);
    const auto req_procs = static_cast<long long>(v[kFieldReqProcs]);
    const auto alloc_procs = static_cast<long long>(v[kFieldAllocProcs]);
    r.job.requested_processors = static_cast<int>(req_procs == -1 ? alloc_procs : req_procs);
    const auto req_time = static_cast<Seconds>(v[kFieldReqTime]);
    r.job.requested_time = req_time == -1 ? r.job.actual_runtime : req_time;
    const auto user = static_cast<std::int64_t>(v[kFieldUser]);
    r.job.user_id = user < 0 ? kUnknownUser : user;

    const bool cancelled = r.job.actual_runtime == 0 && r.wait == -1;
    if (r.job.actual_runtime < 0 || r.job.requested_processors < 1 ||
        r.job.submit_time < 0 || r.job.requested_time < 0 || cancelled) {
      ++dropped;
      continue;
    }
    raw.push_back(r);
  }

  JobTrace trace;
  trace.source_name = options.source_name;
  if (options.cluster_size) {
    trace.cluster_size = *options.cluster_size;
  } else if (header_size) {
    trace.cluster_size = *header_size;
  } else {
    throw ParseError("missing '; MaxProcs:' header and no cluster size override");
  }
  if (trace.cluster_size < 1) throw ParseError("cluster size must be positive");

  for (const auto& r : raw) {
    if (r.job.requested_processors > trace.cluster_size) {
      ++dropped;
      continue;
    }
    if (options.max_jobs && trace.jobs.size() >= *options.max_jobs) break;
    trace.jobs.push_back(r.job);
  }
  trace.dropped = dropped;
  if (trace.jobs.empty()) throw EmptyTrace("trace contains no valid jobs");

  std::stable_sort(trace.jobs.begin(), trace.jobs.end(), [](const Job& a, const Job& b) {
    return a.submit_time < b.submit_time;
  });
  return trace;
}

JobTrace load_swf(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("trace not found: " + path);
  ParseOptions opts = options;
  if (opts.source_name.empty()) {
    const auto slash = path.find_last_of('/');
    opts.source_name = slash == std::string::npos ? path : path.substr(slash + 1);
  }
  return parse_swf(in, opts);
}

void write_swf(std::ostream& out, const JobTrace& trace) {
  out << "; Version: 2.2\n";
  if (!trace.source_name.empty()) out << "; Note: " << trace.source_name << "\n";
  out << "; MaxJobs: " << trace.jobs.size() << "\n";
  out << "; MaxProcs: " << trace.cluster_size << "\n";
  for (const auto& j : trace.jobs) {
    // wait is written as 0: a -1 wait with zero runtime reads back as a cancelled job.
    out << j.job_id << ' ' << j.submit_time << " 0 " << j.actual_runtime << ' '
        << j.requested_processors << " -1 -1 " << j.requested_processors << ' '
        << j.requested_time << " -1 1 " << j.user_id << " -1 -1 -1 -1 -1 -1\n";
  }
}

TraceStats trace_stats(const std::vector<Job>& jobs) {
  if (jobs.empty()) throw EmptyTrace("cannot compute statistics of an empty trace");
  TraceStats s;
  s.job_count = jobs.size();
  double runtime_sum = 0.0;
  double procs_sum = 0.0;
  for (const auto& j : jobs) {
    runtime_sum += static_cast<double>(j.requested_time);
    procs_sum += j.requested_processors;
  }
  const double n = static_cast<double>(jobs.size());
  s.avg_requested_runtime = runtime_sum / n;
  s.avg_requested_processors = procs_sum / n;
  if (jobs.size() > 1) {
    double interval_sum = 0.0;
    for (std::size_t i = 1; i < jobs.size(); ++i) {
      interval_sum += static_cast<double>(jobs[i].submit_time - jobs[i - 1].submit_time);
    }
    s.avg_arrival_interval = interval_sum / (n - 1.0);
  }
  return s;
}

TraceStats trace_stats(const JobTrace& trace) { return trace_stats(trace.jobs); }

JobSequence sequence_at(const JobTrace& trace, std::size_t offset, std::size_t length) {
  if (length == 0) throw InsufficientJobs("sequence length must be positive");
  if (offset + length > trace.jobs.size()) {
    throw InsufficientJobs("requested " + std::to_string(length) + " jobs at offset " +
                           std::to_string(offset) + " but trace has " +
                           std::to_string(trace.jobs.size()));
  }
  JobSequence seq;
  seq.cluster_size = trace.cluster_size;
  seq.time_cap = trace.max_requested_time();
  seq.offset = offset;
  seq.jobs.assign(trace.jobs.begin() + static_cast<std::ptrdiff_t>(offset),
                  trace.jobs.begin() + static_cast<std::ptrdiff_t>(offset + length));
  const Seconds base = seq.jobs.front().submit_time;
  for (auto& j : seq.jobs) j.submit_time -= base;
  return seq;
}

JobSequence sample_sequence(const JobTrace& trace, std::size_t length, std::uint64_t seed) {
  if (length == 0 || length > trace.jobs.size()) {
    throw InsufficientJobs("cannot sample " + std::to_string(length) + " jobs from a trace of " +
                           std::to_string(trace.jobs.size()));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, trace.jobs.size() - length);
  return sequence_at(trace, pick(rng), length);
}

JobTrace generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.job_count == 0) throw EmptyTrace("synthetic job_count is 0");
  if (config.cluster_size < 1) throw ConfigError("cluster_size must be positive");
  if (!(config.arrival_rate > 0.0) || !std::isfinite(config.arrival_rate)) {
    throw ConfigError("arrival_rate must be positive");
  }
  if (config.runtime_min < 1 || config.runtime_max < config.runtime_min) {
    throw ConfigError("runtime range must satisfy 1 <= runtime_min <= runtime_max");
  }
  if (config.proc_min < 1 || config.proc_max < config.proc_min) {
    throw ConfigError("processor range must satisfy 1 <= proc_min <= proc_max");
  }
  if (config.proc_max > config.cluster_size) {
    throw ConfigError("proc_max " + std::to_string(config.proc_max) + " exceeds cluster_size " +
                      std::to_string(config.cluster_size));
  }
  if (config.user_count < 1) throw ConfigError("user_count must be positive");
  const auto powers = powers_of_two_in(config.proc_min, config.proc_max);
  if (powers.empty()) throw ConfigError("processor range contains no power of two");

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(config.arrival_rate);
  std::uniform_real_distribution<double> log_runtime(
      std::log(static_cast<double>(config.runtime_min)),
      std::log(static_cast<double>(config.runtime_max)));
  std::uniform_int_distribution<std::size_t> pick_power(0, powers.size() - 1);
  std::uniform_int_distribution<int> pick_user(0, config.user_count - 1);

  JobTrace trace;
  trace.cluster_size = config.cluster_size;
  trace.source_name = "synthetic-" + std::to_string(seed);
  trace.jobs.reserve(config.job_count);
  double clock = 0.0;
  for (std::size_t i = 0; i < config.job_count; ++i) {
    Job j;
    j.job_id = static_cast<std::int64_t>(i + 1);
    j.submit_time = static_cast<Seconds>(std::floor(clock));
    const auto runtime = static_cast<Seconds>(std::llround(std::exp(log_runtime(rng))));
    j.actual_runtime = std::clamp(runtime, config.runtime_min, config.runtime_max);
    j.requested_time = j.actual_runtime;
    j.requested_processors = powers[pick_power(rng)];
    j.user_id = pick_user(rng);
    trace.jobs.push_back(j);
    clock += gap(rng);
  }
  return trace;
}

std::uint64_t sequence_hash(const JobSequence& sequence) {
  std::uint64_t h = splitmix64(sequence.jobs.size() ^ (static_cast<std::uint64_t>(sequence.cluster_size) << 32));
  for (const auto& j : sequence.jobs) {
    for (std::uint64_t v : {static_cast<std::uint64_t>(j.job_id), static_cast<std::uint64_t>(j.submit_time),
                            static_cast<std::uint64_t>(j.requested_processors),
                            static_cast<std::uint64_t>(j.requested_time),
                            static_cast<std::uint64_t>(j.actual_runtime)}) {
      h = splitmix64(h ^ v);
    }
  }
  return h;
}

}  // namespace rlsched
