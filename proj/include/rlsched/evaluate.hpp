#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rlsched/csv.hpp"
#include "rlsched/goal.hpp"
#include "rlsched/neural.hpp"
#include "rlsched/simulator.hpp"

namespace rlsched {

// Greedy (argmax) scheduler over a trained kernel policy.
class PolicyScheduler final : public SchedulerPolicy {
 public:
  PolicyScheduler(PolicyNet net, std::string name, ObservationOptions options = {});
  std::size_t select(const DecisionContext& ctx) override;
  std::string name() const override { return name_; }
  const PolicyNet& net() const { return net_; }

 private:
  PolicyNet net_;
  std::string name_;
  ObservationOptions options_;
};

struct SchedulerFactory {
  std::string name;
  std::function<std::unique_ptr<SchedulerPolicy>()> make;
};

// A heuristic name (fcfs, sjf, ...) or a checkpoint path. Checkpoints are
// loaded once here; ModelError propagates.
SchedulerFactory make_scheduler_factory(const std::string& spec,
                                        int max_obsv_size = kDefaultMaxObsvSize);

struct EvaluationSpec {
  Goal goal = Goal::AvgBoundedSlowdown;
  bool backfilling = true;
  std::size_t sequence_length = 1024;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
};

struct EvaluationResult {
  std::vector<std::string> schedulers;
  std::vector<std::uint64_t> sequence_hashes;          // one per repetition
  std::vector<std::vector<ScheduleMetrics>> metrics;   // [scheduler][repetition]
  std::vector<double> mean_goal_metric;                // per scheduler
};

// Seed of the sequence drawn for repetition `rep`.
std::uint64_t evaluation_sequence_seed(std::uint64_t seed, std::size_t rep);

// Every repetition draws one random sequence that all schedulers run on.
EvaluationResult evaluate_schedulers(const JobTrace& trace,
                                     const std::vector<SchedulerFactory>& schedulers,
                                     const EvaluationSpec& spec);

// Columns: trace,backfilling,<scheduler...>; one row per (trace, backfilling).
CsvTable evaluation_table(const std::vector<SchedulerFactory>& schedulers);
void append_evaluation_row(CsvTable& table, const std::string& trace_name, bool backfilling,
                           const EvaluationResult& result);

// Columns: trace,backfilling,scheduler,repetition,sequence_hash,avg_bsld,
// avg_slowdown,avg_wait,avg_turnaround,utilization,goal_metric
CsvTable evaluation_details(const std::string& trace_name, bool backfilling,
                            const EvaluationResult& result, Goal goal);

}  // namespace rlsched
