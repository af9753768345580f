#include "rlsched/metrics.hpp"

#include <algorithm>
#include <ostream>

#include "rlsched/errors.hpp"
#include "rlsched/goal.hpp"

namespace rlsched {

double bounded_slowdown(Seconds wait, Seconds runtime) {
  const double turnaround = static_cast<double>(wait + runtime);
  const double denom = static_cast<double>(std::max(runtime, kInteractiveThreshold));
  return std::max(turnaround / denom, 1.0);
}

double slowdown(Seconds wait, Seconds runtime) {
  const Seconds denom = std::max<Seconds>(runtime, 1);
  return static_cast<double>(wait + runtime) / static_cast<double>(denom);
}

double utilization(const ScheduleRecord& record, int cluster_size) {
  const Seconds horizon = record.horizon_end - record.horizon_begin;
  if (horizon <= 0 || cluster_size <= 0) return 0.0;
  double used = 0.0;
  for (const auto& j : record.jobs) {
    used += static_cast<double>(j.procs) * static_cast<double>(j.runtime());
  }
  return used / (static_cast<double>(cluster_size) * static_cast<double>(horizon));
}

ScheduleMetrics compute_metrics(const ScheduleRecord& record, int cluster_size) {
  ScheduleMetrics m;
  if (record.jobs.empty()) return m;
  double bsld_sum = 0.0;
  double sld_sum = 0.0;
  Seconds wait_sum = 0;
  Seconds runtime_sum = 0;
  std::map<std::int64_t, std::pair<double, std::size_t>> per_user;
  for (const auto& j : record.jobs) {
    const double b = bounded_slowdown(j.wait(), j.runtime());
    bsld_sum += b;
    sld_sum += slowdown(j.wait(), j.runtime());
    wait_sum += j.wait();
    runtime_sum += j.runtime();
    auto& u = per_user[j.user_id];
    u.first += b;
    ++u.second;
  }
  const double n = static_cast<double>(record.jobs.size());
  m.avg_bounded_slowdown = bsld_sum / n;
  m.avg_slowdown = sld_sum / n;
  m.avg_wait = static_cast<double>(wait_sum) / n;
  m.avg_runtime = static_cast<double>(runtime_sum) / n;
  m.avg_turnaround = static_cast<double>(wait_sum + runtime_sum) / n;
  m.utilization = utilization(record, cluster_size);
  for (const auto& [user, acc] : per_user) {
    m.per_user_avg_bsld[user] = acc.first / static_cast<double>(acc.second);
  }
  return m;
}

void write_record_csv(std::ostream& out, const ScheduleRecord& record) {
  out << "job_id,user_id,submit,start,end,procs,wait,bsld\n";
  for (const auto& j : record.jobs) {
    out << j.job_id << ',' << j.user_id << ',' << j.submit << ',' << j.start << ',' << j.end
        << ',' << j.procs << ',' << j.wait() << ',' << bounded_slowdown(j.wait(), j.runtime())
        << '\n';
  }
}

std::string_view goal_name(Goal goal) {
  switch (goal) {
    case Goal::AvgBoundedSlowdown: return "bsld";
    case Goal::AvgSlowdown: return "slowdown";
    case Goal::AvgWait: return "wait";
    case Goal::Utilization: return "util";
    case Goal::FairMaxUserBsld: return "fair-bsld";
  }
  return "?";
}

Goal parse_goal(std::string_view name) {
  for (Goal g : {Goal::AvgBoundedSlowdown, Goal::AvgSlowdown, Goal::AvgWait, Goal::Utilization,
                 Goal::FairMaxUserBsld}) {
    if (goal_name(g) == name) return g;
  }
  throw ConfigError("unknown goal '" + std::string(name) +
                    "' (expected bsld, slowdown, wait, util, fair-bsld)");
}

bool goal_minimizes(Goal goal) { return goal != Goal::Utilization; }

double goal_metric(const ScheduleMetrics& metrics, Goal goal) {
  switch (goal) {
    case Goal::AvgBoundedSlowdown: return metrics.avg_bounded_slowdown;
    case Goal::AvgSlowdown: return metrics.avg_slowdown;
    case Goal::AvgWait: return metrics.avg_wait;
    case Goal::Utilization: return metrics.utilization;
    case Goal::FairMaxUserBsld: {
      if (metrics.per_user_avg_bsld.empty() || metrics.per_user_avg_bsld.count(kUnknownUser)) {
        throw MissingUserInfo("fairness goal requires user ids on every job");
      }
      double worst = 0.0;
      for (const auto& [user, v] : metrics.per_user_avg_bsld) worst = std::max(worst, v);
      return worst;
    }
  }
  return 0.0;
}

double sequence_reward(const ScheduleMetrics& metrics, Goal goal) {
  const double v = goal_metric(metrics, goal);
  return goal_minimizes(goal) ? -v : v;
}

}  // namespace rlsched
