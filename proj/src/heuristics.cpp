#include "rlsched/heuristics.hpp"

#include <algorithm>
#include <cmath>

#include "rlsched/errors.hpp"

namespace rlsched {

std::string_view heuristic_name(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::FCFS: return "fcfs";
    case HeuristicKind::SJF: return "sjf";
    case HeuristicKind::WFP3: return "wfp3";
    case HeuristicKind::UNICEP: return "unicep";
    case HeuristicKind::F1: return "f1";
  }
  return "?";
}

bool is_heuristic_name(std::string_view name) {
  return std::any_of(kAllHeuristics.begin(), kAllHeuristics.end(),
                     [&](HeuristicKind k) { return heuristic_name(k) == name; });
}

HeuristicKind parse_heuristic(std::string_view name) {
  for (HeuristicKind k : kAllHeuristics) {
    if (heuristic_name(k) == name) return k;
  }
  throw ConfigError("unknown heuristic '" + std::string(name) +
                    "' (expected fcfs, sjf, wfp3, unicep, f1)");
}

double score(HeuristicKind kind, const PendingJob& pending, Seconds now) {
  const Job& job = pending.job;
  const double s = static_cast<double>(job.submit_time);
  const double w = static_cast<double>(std::max<Seconds>(now - job.submit_time, 0));
  const double r = static_cast<double>(std::max<Seconds>(job.requested_time, 1));
  const double n = static_cast<double>(job.requested_processors);
  switch (kind) {
    case HeuristicKind::FCFS: return s;
    case HeuristicKind::SJF: return static_cast<double>(job.requested_time);
    case HeuristicKind::WFP3: {
      const double ratio = w / r;
      return -(ratio * ratio * ratio) * n;
    }
    case HeuristicKind::UNICEP: return -w / (std::log2(std::max(n, 2.0)) * r);
    case HeuristicKind::F1: return std::log10(r) * n + 870.0 * std::log10(std::max(s, 1.0));
  }
  return 0.0;
}

std::size_t select(HeuristicKind kind, std::span<const PendingJob> queue, Seconds now) {
  if (queue.empty()) throw EmptyQueue("cannot select from an empty queue");
  std::size_t best = 0;
  double best_score = score(kind, queue[0], now);
  for (std::size_t i = 1; i < queue.size(); ++i) {
    const double sc = score(kind, queue[i], now);
    const Job& a = queue[i].job;
    const Job& b = queue[best].job;
    const bool better =
        sc < best_score ||
        (sc == best_score && (a.submit_time < b.submit_time ||
                              (a.submit_time == b.submit_time && a.job_id < b.job_id)));
    if (better) {
      best = i;
      best_score = sc;
    }
  }
  return best;
}

}  // namespace rlsched
