#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rlsched/goal.hpp"
#include "rlsched/metrics.hpp"
#include "rlsched/workload.hpp"

namespace rlsched {

inline constexpr int kJobFeatures = 5;
inline constexpr int kDefaultMaxObsvSize = 128;

// Feature columns of an observation row.
enum Feature : int { kWait = 0, kRequestedTime = 1, kProcessors = 2, kCanRunNow = 3, kFreeProcessors = 4 };

struct RunningJob {
  std::int64_t job_id = 0;
  Seconds completion_time = 0;  // start + requested_time, the scheduler-visible estimate
  int processors = 0;
};

struct ClusterState {
  int total_processors = 0;
  int free_processors = 0;
  std::vector<RunningJob> running;

  static ClusterState idle(int processors) { return {processors, processors, {}}; }
  bool fits(int processors) const { return processors <= free_processors; }
  void start(std::int64_t job_id, Seconds completion_time, int processors);
  void finish(std::int64_t job_id);
  // free = total - sum of running processors, and 0 <= free <= total.
  bool conserved() const;
};

struct PendingJob {
  Job job;
  Seconds wait_so_far = 0;
};

// The earliest time at which a blocked job can start, judged from running
// jobs' requested times, and the processors left over at that instant.
struct Reservation {
  Seconds start = 0;
  int spare = 0;
};

Reservation compute_reservation(const ClusterState& cluster, int processors, Seconds now);

// EASY backfilling against a single reservation. Scans `queue` in FCFS
// order and starts every job that fits now without delaying the reservation;
// started jobs are added to `cluster`. Returns their indices into `queue`.
std::vector<std::size_t> backfill_pass(ClusterState& cluster, const Reservation& reservation,
                                       std::span<const PendingJob> queue, Seconds now);

// Fixed-capacity job matrix handed to the networks. Only the first
// `occupied()` rows are stored; rows past it are implicit zero padding and
// always illegal.
class ObservationMatrix {
 public:
  explicit ObservationMatrix(int capacity = kDefaultMaxObsvSize) : capacity_(capacity) {}

  int capacity() const { return capacity_; }
  int occupied() const { return static_cast<int>(legal_.size()); }
  int legal_count() const;

  bool legal(int slot) const { return slot >= 0 && slot < occupied() && legal_[slot] != 0; }
  double at(int slot, int feature) const;
  std::span<const double> row(int slot) const;
  std::span<const double> occupied_values() const { return values_; }
  std::size_t queue_index(int slot) const { return slot_to_queue_.at(slot); }

  // Full capacity x kJobFeatures row-major matrix including padding.
  std::vector<double> dense() const;

  void push_row(std::span<const double> features, bool legal, std::size_t queue_index);
  void set_legal(int slot, bool legal) { legal_.at(slot) = legal ? 1 : 0; }

 private:
  int capacity_;
  std::vector<double> values_;
  std::vector<std::uint8_t> legal_;
  std::vector<std::size_t> slot_to_queue_;
};

struct ObservationOptions {
  int max_obsv_size = kDefaultMaxObsvSize;
  // Mask jobs that cannot start immediately (unless none can).
  bool mask_non_runnable = false;
};

ObservationMatrix build_observation(std::span<const PendingJob> queue, const ClusterState& cluster,
                                    Seconds now, Seconds time_cap,
                                    const ObservationOptions& options = {});

struct DecisionContext {
  std::span<const PendingJob> queue;
  const ClusterState& cluster;
  Seconds now = 0;
  Seconds time_cap = 1;
};

class SchedulerPolicy {
 public:
  virtual ~SchedulerPolicy() = default;
  // Index into ctx.queue of the job to run next.
  virtual std::size_t select(const DecisionContext& ctx) = 0;
  virtual std::string name() const = 0;
};

struct EnvOptions {
  bool backfilling = true;
  Goal goal = Goal::AvgBoundedSlowdown;
  ObservationOptions observation;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

struct Transition {
  ObservationMatrix observation;
  double reward = 0.0;
  bool done = false;
};

struct ReservationEvent {
  std::int64_t job_id = 0;
  Seconds selected_at = 0;
  Seconds reserved_start = 0;  // reservation computed when the job was selected
  Seconds actual_start = 0;
};

// Discrete-event cluster simulator with a gym-style interface. Jobs run for
// min(actual_runtime, requested_time): the requested time is a hard limit.
class SchedulingEnv {
 public:
  explicit SchedulingEnv(EnvOptions options = {});

  ObservationMatrix reset(JobSequence sequence);

  // Act on a slot of the current observation.
  Transition step(int slot);
  // Act on a position in pending(); no observation is built.
  StepResult apply(std::size_t queue_index);

  const ObservationMatrix& observation();
  std::span<const PendingJob> pending() const { return pending_; }
  const ClusterState& cluster() const { return cluster_; }
  Seconds now() const { return now_; }
  bool done() const { return done_; }
  DecisionContext context() const { return {pending_, cluster_, now_, sequence_.time_cap}; }
  const JobSequence& sequence() const { return sequence_; }
  const EnvOptions& options() const { return options_; }

  ScheduleRecord record() const;
  ScheduleMetrics metrics() const;
  const std::vector<std::int64_t>& start_order() const { return start_order_; }
  // Job ids in the order the scheduler selected them (backfilled jobs excluded).
  const std::vector<std::int64_t>& selection_order() const { return selection_order_; }
  const std::vector<ReservationEvent>& reservations() const { return reservations_; }

 private:
  struct Active {
    Seconds end = 0;
    std::int64_t job_id = 0;
  };

  Seconds effective_runtime(const Job& job) const;
  bool has_next_event() const;
  void advance_to_next_event();
  void admit_arrivals();
  void refresh_waits();
  void launch(std::size_t queue_index, bool already_in_cluster);
  void backfill(const Reservation& reservation);

  EnvOptions options_;
  JobSequence sequence_;
  std::vector<PendingJob> pending_;
  std::vector<std::size_t> pending_index_;  // sequence index per pending entry
  std::vector<Active> active_;              // actual completions
  ClusterState cluster_;
  std::vector<Seconds> starts_;
  std::vector<std::int64_t> start_order_;
  std::vector<std::int64_t> selection_order_;
  std::vector<ReservationEvent> reservations_;
  std::size_t next_arrival_ = 0;
  std::size_t started_ = 0;
  Seconds now_ = 0;
  bool done_ = true;
  ObservationMatrix current_obs_;
  bool obs_valid_ = false;
};

ScheduleRecord simulate(const JobSequence& sequence, SchedulerPolicy& scheduler, bool backfilling);
ScheduleMetrics run_with_scheduler(const JobSequence& sequence, SchedulerPolicy& scheduler,
                                   bool backfilling);

}  // namespace rlsched
