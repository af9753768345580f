#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rlsched/goal.hpp"
#include "rlsched/neural.hpp"
#include "rlsched/simulator.hpp"
#include "rlsched/workload.hpp"

namespace rlsched {

// Open interval of acceptable SJF metric values for phase-1 training sequences.
struct FilterRange {
  double low = 0.0;   // median
  double high = 0.0;  // 2 * mean
  bool contains(double v) const { return v > low && v < high; }
};

struct PpoConfig {
  std::size_t trajectories_per_epoch = 100;
  std::size_t trajectory_len = 256;
  int policy_iterations = 80;
  int value_iterations = 80;
  double learning_rate = 1e-3;
  double clip_ratio = 0.2;
  double gamma = 1.0;
  double gae_lambda = 0.97;
  double target_kl = 0.015;
  int epochs = 50;
  std::uint64_t seed = 0;
  Goal goal = Goal::AvgBoundedSlowdown;
  bool backfilling = true;
  ObservationOptions observation;

  bool filter = false;
  std::optional<FilterRange> filter_range;  // computed from the trace when unset
  int filter_step1_epochs = -1;             // -1: half of `epochs`
  std::size_t filter_samples = 100;
  int rejection_cap = 50;

  int workers = 1;

  void validate() const;
};

struct TrajectoryStep {
  ObservationMatrix observation;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
};

// One episode: the agent's decisions over a sampled job sequence. Backfilled
// jobs start without a decision, so a 256-job episode may have fewer steps.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double metric = 0.0;  // goal metric of the finished schedule
  std::size_t sequence_offset = 0;
  std::uint64_t sequence_hash = 0;
  bool filter_cap_hit = false;  // accepted after exhausting the rejection cap
};

struct Batch {
  std::vector<Trajectory> trajectories;
  std::size_t rejections = 0;    // sequences rejected by the filter
  std::size_t cap_accepts = 0;   // sequences accepted only because of the cap
  std::size_t step_count() const;
};

// Flattened per step, trajectory by trajectory.
struct Advantages {
  std::vector<double> raw;         // GAE before normalization
  std::vector<double> normalized;  // zero mean, unit variance over the batch
  std::vector<double> returns;     // reward-to-go
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  long long steps_taken() const { return t_; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

struct UpdateStats {
  double policy_loss = 0.0;  // before the first policy step
  double value_loss = 0.0;   // before the first value step
  double kl = 0.0;           // at the last evaluated policy iteration
  int policy_iterations = 0; // steps actually taken
};

struct EpochRow {
  int epoch = 0;
  double mean_metric = 0.0;
  double std_metric = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double seconds = 0.0;
};

struct LearningCurve {
  std::vector<EpochRow> rows;
  void write_csv(std::ostream& out) const;
  static LearningCurve read_csv(std::istream& in);
};

struct TrainResult {
  PolicyNet policy;
  ValueNet value;
  PolicyNet best_policy;  // parameters that produced the best epoch batch
  ValueNet best_value;
  int best_epoch = -1;
  LearningCurve curve;
  std::optional<FilterRange> filter_range;
  std::size_t cap_accepts = 0;
};

// (median, 2 * mean) of the samples.
FilterRange filter_range_from_samples(std::vector<double> samples);

// Schedules `n_samples` random sequences with SJF (backfilling on) and
// derives the range from their goal metrics.
FilterRange compute_filter_range(const JobTrace& trace, Goal goal, std::size_t n_samples,
                                 std::uint64_t seed, std::size_t sequence_length = 256,
                                 std::vector<double>* samples_out = nullptr);

// Seed for trajectory `index` of `epoch`; independent of the worker count.
std::uint64_t trajectory_seed(std::uint64_t seed, int epoch, std::size_t index);

Trajectory run_trajectory(const JobTrace& trace, const PolicyNet& policy, const ValueNet& value,
                          const PpoConfig& config, std::uint64_t seed, const FilterRange* filter,
                          std::size_t* rejections = nullptr);

// Trajectories fan out over `config.workers` OpenMP threads; the result is
// identical to serial::collect_trajectories for any worker count.
Batch collect_trajectories(const JobTrace& trace, const PolicyNet& policy, const ValueNet& value,
                           const PpoConfig& config, int epoch, const FilterRange* filter);

Advantages compute_advantages(const Batch& batch, double gamma, double lambda);

UpdateStats ppo_update(PolicyNet& policy, ValueNet& value, Adam& policy_opt, Adam& value_opt,
                       const Batch& batch, const Advantages& advantages, const PpoConfig& config);

TrainResult train(const JobTrace& trace, const PpoConfig& config,
                  const std::function<void(const EpochRow&)>& on_epoch = {});

namespace serial {
Batch collect_trajectories(const JobTrace& trace, const PolicyNet& policy, const ValueNet& value,
                           const PpoConfig& config, int epoch, const FilterRange* filter);
}  // namespace serial

}  // namespace rlsched
