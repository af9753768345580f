#pragma once

#include <string>
#include <string_view>

#include "rlsched/metrics.hpp"

namespace rlsched {

enum class Goal { AvgBoundedSlowdown, AvgSlowdown, AvgWait, Utilization, FairMaxUserBsld };

std::string_view goal_name(Goal goal);
// Accepts: bsld, slowdown, wait, util, fair-bsld
Goal parse_goal(std::string_view name);

// The goal's natural metric value (e.g. average bsld, utilization fraction).
double goal_metric(const ScheduleMetrics& metrics, Goal goal);
// Larger is better: negated metric for minimization goals, utilization as is.
double sequence_reward(const ScheduleMetrics& metrics, Goal goal);
bool goal_minimizes(Goal goal);

}  // namespace rlsched
