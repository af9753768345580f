#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "rlsched/workload.hpp"

namespace rlsched {

inline constexpr Seconds kInteractiveThreshold = 10;

struct JobRecord {
  std::int64_t job_id = 0;
  std::int64_t user_id = kUnknownUser;
  Seconds submit = 0;
  Seconds start = 0;
  Seconds end = 0;
  int procs = 0;
  Seconds wait() const { return start - submit; }
  Seconds runtime() const { return end - start; }
};

struct ScheduleRecord {
  std::vector<JobRecord> jobs;  // in sequence order
  Seconds horizon_begin = 0;    // first submit
  Seconds horizon_end = 0;      // last completion
};

struct ScheduleMetrics {
  double avg_bounded_slowdown = 0.0;
  double avg_slowdown = 0.0;
  double avg_wait = 0.0;
  double avg_turnaround = 0.0;
  double avg_runtime = 0.0;
  double utilization = 0.0;
  std::map<std::int64_t, double> per_user_avg_bsld;
};

// max((wait + runtime) / max(runtime, 10), 1)
double bounded_slowdown(Seconds wait, Seconds runtime);
// (wait + runtime) / runtime, with runtime floored at 1 second.
double slowdown(Seconds wait, Seconds runtime);

// Processor-seconds allocated over [horizon_begin, horizon_end] divided by
// cluster_size times the horizon length; 0 for an empty horizon.
double utilization(const ScheduleRecord& record, int cluster_size);

ScheduleMetrics compute_metrics(const ScheduleRecord& record, int cluster_size);

// CSV columns: job_id,user_id,submit,start,end,procs,wait,bsld
void write_record_csv(std::ostream& out, const ScheduleRecord& record);

}  // namespace rlsched
