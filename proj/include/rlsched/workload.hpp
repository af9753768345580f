#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rlsched {

using Seconds = std::int64_t;

inline constexpr std::int64_t kUnknownUser = -1;

// One batch job. `actual_runtime` is only consumed by the simulator;
// schedulers see `requested_time`.
struct Job {
  std::int64_t job_id = 0;
  Seconds submit_time = 0;
  int requested_processors = 1;
  Seconds requested_time = 0;
  Seconds actual_runtime = 0;
  std::int64_t user_id = kUnknownUser;

  friend bool operator==(const Job&, const Job&) = default;
};

struct JobTrace {
  std::vector<Job> jobs;  // sorted by submit_time
  int cluster_size = 0;
  std::string source_name;
  std::size_t dropped = 0;  // data lines rejected while parsing

  // Largest requested_time over all jobs; used to normalize observation features.
  Seconds max_requested_time() const;
  bool has_user_info() const;
};

// A contiguous window of a trace with submit times re-based to 0.
struct JobSequence {
  std::vector<Job> jobs;
  int cluster_size = 0;
  Seconds time_cap = 1;     // normalization cap for time features
  std::size_t offset = 0;   // window start in the source trace

  static JobSequence from_jobs(std::vector<Job> jobs, int cluster_size);
};

struct TraceStats {
  double avg_arrival_interval = 0.0;
  double avg_requested_runtime = 0.0;
  double avg_requested_processors = 0.0;
  std::size_t job_count = 0;
};

struct ParseOptions {
  std::optional<int> cluster_size;     // overrides the MaxProcs header
  std::optional<std::size_t> max_jobs; // keep only the first N valid jobs
  std::string source_name;
};

struct SyntheticConfig {
  int cluster_size = 256;
  std::size_t job_count = 10000;
  double arrival_rate = 1.0 / 200.0;  // jobs per second
  Seconds runtime_min = 10;
  Seconds runtime_max = 20000;
  int proc_min = 1;
  int proc_max = 64;
  int user_count = 16;

  double mean_arrival_interval() const { return 1.0 / arrival_rate; }
  double mean_runtime() const;
  double mean_processors() const;
};

JobTrace parse_swf(std::istream& in, const ParseOptions& options = {});
JobTrace load_swf(const std::string& path, const ParseOptions& options = {});
void write_swf(std::ostream& out, const JobTrace& trace);

TraceStats trace_stats(const JobTrace& trace);
TraceStats trace_stats(const std::vector<Job>& jobs);

JobSequence sample_sequence(const JobTrace& trace, std::size_t length, std::uint64_t seed);
JobSequence sequence_at(const JobTrace& trace, std::size_t offset, std::size_t length);

JobTrace generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

// Stable 64-bit fingerprint of a sequence's scheduler-relevant fields.
std::uint64_t sequence_hash(const JobSequence& sequence);

}  // namespace rlsched
