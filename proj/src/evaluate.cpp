#include "rlsched/evaluate.hpp"

#include <sstream>

#include "rlsched/heuristics.hpp"
#include "rlsched/model_io.hpp"

namespace rlsched {

PolicyScheduler::PolicyScheduler(PolicyNet net, std::string name, ObservationOptions options)
    : net_(std::move(net)), name_(std::move(name)), options_(options) {
  options_.max_obsv_size = net_.max_obsv_size;
}

std::size_t PolicyScheduler::select(const DecisionContext& ctx) {
  const auto obs = build_observation(ctx.queue, ctx.cluster, ctx.now, ctx.time_cap, options_);
  return obs.queue_index(policy_argmax(policy_forward(net_, obs)));
}

SchedulerFactory make_scheduler_factory(const std::string& spec, int max_obsv_size) {
  if (is_heuristic_name(spec)) {
    const auto kind = parse_heuristic(spec);
    return {std::string(heuristic_name(kind)),
            [kind] { return std::make_unique<HeuristicScheduler>(kind); }};
  }
  auto net = std::make_shared<const PolicyNet>(load_checkpoint(spec, max_obsv_size).policy);
  return {spec, [net, spec] { return std::make_unique<PolicyScheduler>(*net, spec); }};
}

std::uint64_t evaluation_sequence_seed(std::uint64_t seed, std::size_t rep) {
  return seed ^ ((rep + 1) * 0x9e3779b97f4a7c15ULL);
}

EvaluationResult evaluate_schedulers(const JobTrace& trace,
                                     const std::vector<SchedulerFactory>& schedulers,
                                     const EvaluationSpec& spec) {
  EvaluationResult result;
  result.metrics.resize(schedulers.size());
  result.mean_goal_metric.assign(schedulers.size(), 0.0);
  for (const auto& s : schedulers) result.schedulers.push_back(s.name);

  for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
    const auto seq =
        sample_sequence(trace, spec.sequence_length, evaluation_sequence_seed(spec.seed, rep));
    result.sequence_hashes.push_back(sequence_hash(seq));
    for (std::size_t i = 0; i < schedulers.size(); ++i) {
      auto scheduler = schedulers[i].make();
      const auto m = run_with_scheduler(seq, *scheduler, spec.backfilling);
      result.mean_goal_metric[i] += goal_metric(m, spec.goal) / static_cast<double>(spec.repetitions);
      result.metrics[i].push_back(m);
    }
  }
  return result;
}

CsvTable evaluation_table(const std::vector<SchedulerFactory>& schedulers) {
  CsvTable table;
  table.header = {"trace", "backfilling"};
  for (const auto& s : schedulers) table.header.push_back(s.name);
  return table;
}

void append_evaluation_row(CsvTable& table, const std::string& trace_name, bool backfilling,
                           const EvaluationResult& result) {
  std::vector<std::string> row{trace_name, backfilling ? "1" : "0"};
  for (double v : result.mean_goal_metric) row.push_back(format_double(v));
  table.rows.push_back(std::move(row));
}

CsvTable evaluation_details(const std::string& trace_name, bool backfilling,
                            const EvaluationResult& result, Goal goal) {
  CsvTable table;
  table.header = {"trace",       "backfilling",  "scheduler", "repetition",
                  "sequence_hash", "avg_bsld",   "avg_slowdown", "avg_wait",
                  "avg_turnaround", "utilization", "goal_metric"};
  for (std::size_t i = 0; i < result.schedulers.size(); ++i) {
    for (std::size_t rep = 0; rep < result.metrics[i].size(); ++rep) {
      const auto& m = result.metrics[i][rep];
      std::ostringstream hash;
      hash << std::hex << result.sequence_hashes[rep];
      table.rows.push_back({trace_name, backfilling ? "1" : "0", result.schedulers[i],
                            std::to_string(rep), hash.str(), format_double(m.avg_bounded_slowdown),
                            format_double(m.avg_slowdown), format_double(m.avg_wait),
                            format_double(m.avg_turnaround), format_double(m.utilization),
                            format_double(goal_metric(m, goal))});
    }
  }
  return table;
}

}  // namespace rlsched
