#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "rlsched/simulator.hpp"

namespace rlsched {

enum class HeuristicKind { FCFS, SJF, WFP3, UNICEP, F1 };

inline constexpr std::array<HeuristicKind, 5> kAllHeuristics{
    HeuristicKind::FCFS, HeuristicKind::SJF, HeuristicKind::WFP3, HeuristicKind::UNICEP,
    HeuristicKind::F1};

std::string_view heuristic_name(HeuristicKind kind);
// Accepts fcfs, sjf, wfp3, unicep, f1.
HeuristicKind parse_heuristic(std::string_view name);
bool is_heuristic_name(std::string_view name);

// Priority score of a pending job; the lowest score runs first.
//   FCFS   s
//   SJF    r
//   WFP3   -(w/r)^3 * n
//   UNICEP -w / (log2(n) * r)
//   F1     log10(r) * n + 870 * log10(s)
// with r clamped to >= 1, n to >= 2 inside log2 and s to >= 1 inside log10.
double score(HeuristicKind kind, const PendingJob& job, Seconds now);

// Index of the minimal-score job; ties go to the earlier submit, then the lower id.
std::size_t select(HeuristicKind kind, std::span<const PendingJob> queue, Seconds now);

class HeuristicScheduler final : public SchedulerPolicy {
 public:
  explicit HeuristicScheduler(HeuristicKind kind) : kind_(kind) {}
  std::size_t select(const DecisionContext& ctx) override {
    return rlsched::select(kind_, ctx.queue, ctx.now);
  }
  std::string name() const override { return std::string(heuristic_name(kind_)); }
  HeuristicKind kind() const { return kind_; }

 private:
  HeuristicKind kind_;
};

}  // namespace rlsched
