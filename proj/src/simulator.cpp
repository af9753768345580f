#include "rlsched/simulator.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

#include "rlsched/errors.hpp"

namespace rlsched {

namespace {

bool fcfs_before(const Job& a, const Job& b) {
  if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
  return a.job_id < b.job_id;
}

std::vector<std::size_t> fcfs_order(std::span<const PendingJob> queue) {
  std::vector<std::size_t> order(queue.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fcfs_before(queue[a].job, queue[b].job);
  });
  return order;
}

constexpr std::array<double, kJobFeatures> kZeroRow{};

}  // namespace

void ClusterState::start(std::int64_t job_id, Seconds completion_time, int processors) {
  running.push_back({job_id, completion_time, processors});
  free_processors -= processors;
}

void ClusterState::finish(std::int64_t job_id) {
  auto it = std::find_if(running.begin(), running.end(),
                         [&](const RunningJob& r) { return r.job_id == job_id; });
  if (it == running.end()) return;
  free_processors += it->processors;
  running.erase(it);
}

bool ClusterState::conserved() const {
  int used = 0;
  for (const auto& r : running) used += r.processors;
  return free_processors >= 0 && free_processors <= total_processors &&
         used + free_processors == total_processors;
}

Reservation compute_reservation(const ClusterState& cluster, int processors, Seconds now) {
  if (cluster.fits(processors)) return {now, cluster.free_processors - processors};
  std::vector<RunningJob> by_end = cluster.running;
  std::sort(by_end.begin(), by_end.end(), [](const RunningJob& a, const RunningJob& b) {
    if (a.completion_time != b.completion_time) return a.completion_time < b.completion_time;
    return a.job_id < b.job_id;
  });
  int free = cluster.free_processors;
  std::size_t i = 0;
  while (i < by_end.size()) {
    const Seconds t = by_end[i].completion_time;
    while (i < by_end.size() && by_end[i].completion_time == t) free += by_end[i++].processors;
    if (free >= processors) return {std::max(t, now), free - processors};
  }
  throw std::logic_error("job requests more processors than the cluster has");
}

std::vector<std::size_t> backfill_pass(ClusterState& cluster, const Reservation& reservation,
                                       std::span<const PendingJob> queue, Seconds now) {
  std::vector<std::size_t> started;
  int spare = reservation.spare;
  for (std::size_t i : fcfs_order(queue)) {
    const Job& job = queue[i].job;
    if (!cluster.fits(job.requested_processors)) continue;
    const bool done_in_time = now + job.requested_time <= reservation.start;
    if (!done_in_time && job.requested_processors > spare) continue;
    if (!done_in_time) spare -= job.requested_processors;
    cluster.start(job.job_id, now + job.requested_time, job.requested_processors);
    started.push_back(i);
  }
  return started;
}

int ObservationMatrix::legal_count() const {
  return static_cast<int>(std::count(legal_.begin(), legal_.end(), std::uint8_t{1}));
}

double ObservationMatrix::at(int slot, int feature) const {
  if (slot >= occupied()) return 0.0;
  return values_[static_cast<std::size_t>(slot) * kJobFeatures + feature];
}

std::span<const double> ObservationMatrix::row(int slot) const {
  if (slot >= occupied()) return kZeroRow;
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(slot) * kJobFeatures,
                                                  kJobFeatures);
}

std::vector<double> ObservationMatrix::dense() const {
  std::vector<double> out(static_cast<std::size_t>(capacity_) * kJobFeatures, 0.0);
  std::copy(values_.begin(), values_.end(), out.begin());
  return out;
}

void ObservationMatrix::push_row(std::span<const double> features, bool legal,
                                 std::size_t queue_index) {
  if (occupied() >= capacity_) throw std::length_error("observation is full");
  if (features.size() != kJobFeatures) throw std::invalid_argument("bad feature row width");
  values_.insert(values_.end(), features.begin(), features.end());
  legal_.push_back(legal ? 1 : 0);
  slot_to_queue_.push_back(queue_index);
}

ObservationMatrix build_observation(std::span<const PendingJob> queue, const ClusterState& cluster,
                                    Seconds now, Seconds time_cap,
                                    const ObservationOptions& options) {
  ObservationMatrix obs(options.max_obsv_size);
  auto order = fcfs_order(queue);
  if (order.size() > static_cast<std::size_t>(options.max_obsv_size)) {
    order.resize(static_cast<std::size_t>(options.max_obsv_size));
  }
  const double cap = static_cast<double>(std::max<Seconds>(time_cap, 1));
  const double size = static_cast<double>(std::max(cluster.total_processors, 1));
  auto unit = [](double x) { return std::clamp(x, 0.0, 1.0); };

  bool any_runnable = false;
  for (std::size_t i : order) any_runnable |= cluster.fits(queue[i].job.requested_processors);

  std::array<double, kJobFeatures> row{};
  for (std::size_t i : order) {
    const Job& job = queue[i].job;
    const bool runnable = cluster.fits(job.requested_processors);
    row[kWait] = unit(static_cast<double>(now - job.submit_time) / cap);
    row[kRequestedTime] = unit(static_cast<double>(job.requested_time) / cap);
    row[kProcessors] = unit(job.requested_processors / size);
    row[kCanRunNow] = runnable ? 1.0 : 0.0;
    row[kFreeProcessors] = unit(cluster.free_processors / size);
    const bool legal = !options.mask_non_runnable || runnable || !any_runnable;
    obs.push_row(row, legal, i);
  }
  return obs;
}

SchedulingEnv::SchedulingEnv(EnvOptions options)
    : options_(options), current_obs_(options.observation.max_obsv_size) {}

ObservationMatrix SchedulingEnv::reset(JobSequence sequence) {
  if (sequence.jobs.empty()) throw EmptyTrace("cannot reset on an empty sequence");
  sequence_ = std::move(sequence);
  pending_.clear();
  pending_index_.clear();
  active_.clear();
  cluster_ = ClusterState::idle(sequence_.cluster_size);
  starts_.assign(sequence_.jobs.size(), -1);
  start_order_.clear();
  selection_order_.clear();
  reservations_.clear();
  next_arrival_ = 0;
  started_ = 0;
  done_ = false;
  now_ = sequence_.jobs.front().submit_time;
  admit_arrivals();
  obs_valid_ = false;
  return observation();
}

const ObservationMatrix& SchedulingEnv::observation() {
  if (!obs_valid_) {
    current_obs_ = build_observation(pending_, cluster_, now_, sequence_.time_cap,
                                     options_.observation);
    obs_valid_ = true;
  }
  return current_obs_;
}

Transition SchedulingEnv::step(int slot) {
  if (done_) throw IllegalAction("episode is finished");
  const auto& obs = observation();
  if (!obs.legal(slot)) throw IllegalAction("slot " + std::to_string(slot) + " is not legal");
  const StepResult r = apply(obs.queue_index(slot));
  if (done_) return {ObservationMatrix(options_.observation.max_obsv_size), r.reward, true};
  return {observation(), r.reward, r.done};
}

Seconds SchedulingEnv::effective_runtime(const Job& job) const {
  return std::min(job.actual_runtime, job.requested_time);
}

bool SchedulingEnv::has_next_event() const {
  return !active_.empty() || next_arrival_ < sequence_.jobs.size();
}

void SchedulingEnv::admit_arrivals() {
  const auto& jobs = sequence_.jobs;
  while (next_arrival_ < jobs.size() && jobs[next_arrival_].submit_time <= now_) {
    pending_.push_back({jobs[next_arrival_], now_ - jobs[next_arrival_].submit_time});
    pending_index_.push_back(next_arrival_);
    ++next_arrival_;
  }
}

void SchedulingEnv::refresh_waits() {
  for (auto& p : pending_) p.wait_so_far = now_ - p.job.submit_time;
}

void SchedulingEnv::advance_to_next_event() {
  if (!has_next_event()) throw std::logic_error("simulation stalled with no pending event");
  Seconds t = next_arrival_ < sequence_.jobs.size() ? sequence_.jobs[next_arrival_].submit_time
                                                    : active_.front().end;
  for (const auto& a : active_) t = std::min(t, a.end);
  t = std::max(t, now_);

  // Completions first, lower job id first.
  std::vector<Active> finished;
  for (const auto& a : active_) {
    if (a.end <= t) finished.push_back(a);
  }
  std::sort(finished.begin(), finished.end(),
            [](const Active& a, const Active& b) { return a.job_id < b.job_id; });
  for (const auto& f : finished) cluster_.finish(f.job_id);
  std::erase_if(active_, [t](const Active& a) { return a.end <= t; });
  assert(cluster_.conserved());

  now_ = t;
  admit_arrivals();
  refresh_waits();
  obs_valid_ = false;
}

void SchedulingEnv::launch(std::size_t queue_index, bool already_in_cluster) {
  const std::size_t seq_index = pending_index_[queue_index];
  const Job& job = sequence_.jobs[seq_index];
  if (!already_in_cluster) {
    cluster_.start(job.job_id, now_ + job.requested_time, job.requested_processors);
  }
  active_.push_back({now_ + effective_runtime(job), job.job_id});
  starts_[seq_index] = now_;
  start_order_.push_back(job.job_id);
  ++started_;
  pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(queue_index));
  pending_index_.erase(pending_index_.begin() + static_cast<std::ptrdiff_t>(queue_index));
  assert(cluster_.conserved());
}

void SchedulingEnv::backfill(const Reservation& reservation) {
  auto started = backfill_pass(cluster_, reservation, pending_, now_);
  // Register in FCFS order, then drop from the queue back to front.
  std::vector<std::size_t> positions = started;
  for (std::size_t pos : positions) {
    const std::size_t seq_index = pending_index_[pos];
    const Job& job = sequence_.jobs[seq_index];
    active_.push_back({now_ + effective_runtime(job), job.job_id});
    starts_[seq_index] = now_;
    start_order_.push_back(job.job_id);
    ++started_;
  }
  std::sort(positions.begin(), positions.end(), std::greater<>());
  for (std::size_t pos : positions) {
    pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(pos));
    pending_index_.erase(pending_index_.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  if (!started.empty()) obs_valid_ = false;
  assert(cluster_.conserved());
}

StepResult SchedulingEnv::apply(std::size_t queue_index) {
  if (done_) throw IllegalAction("episode is finished");
  if (queue_index >= pending_.size()) {
    throw IllegalAction("queue index " + std::to_string(queue_index) + " out of range");
  }
  obs_valid_ = false;
  const Job job = pending_[queue_index].job;
  const std::size_t seq_index = pending_index_[queue_index];
  selection_order_.push_back(job.job_id);

  // Park the selected job outside the queue while it waits for processors.
  pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(queue_index));
  pending_index_.erase(pending_index_.begin() + static_cast<std::ptrdiff_t>(queue_index));

  if (!cluster_.fits(job.requested_processors)) {
    Reservation reservation = compute_reservation(cluster_, job.requested_processors, now_);
    ReservationEvent event{job.job_id, now_, reservation.start, 0};
    while (!cluster_.fits(job.requested_processors)) {
      if (options_.backfilling) backfill(reservation);
      advance_to_next_event();
      if (cluster_.fits(job.requested_processors)) break;
      reservation = compute_reservation(cluster_, job.requested_processors, now_);
    }
    event.actual_start = now_;
    reservations_.push_back(event);
  }

  pending_.insert(pending_.begin(), PendingJob{job, now_ - job.submit_time});
  pending_index_.insert(pending_index_.begin(), seq_index);
  launch(0, false);

  StepResult result;
  if (started_ == sequence_.jobs.size()) {
    done_ = true;
    result.done = true;
    result.reward = sequence_reward(metrics(), options_.goal);
    return result;
  }
  while (pending_.empty()) advance_to_next_event();
  return result;
}

ScheduleRecord SchedulingEnv::record() const {
  ScheduleRecord rec;
  rec.jobs.reserve(sequence_.jobs.size());
  if (sequence_.jobs.empty()) return rec;
  rec.horizon_begin = sequence_.jobs.front().submit_time;
  rec.horizon_end = rec.horizon_begin;
  for (std::size_t i = 0; i < sequence_.jobs.size(); ++i) {
    const Job& job = sequence_.jobs[i];
    if (starts_[i] < 0) continue;
    JobRecord r;
    r.job_id = job.job_id;
    r.user_id = job.user_id;
    r.submit = job.submit_time;
    r.start = starts_[i];
    r.end = starts_[i] + effective_runtime(job);
    r.procs = job.requested_processors;
    rec.horizon_end = std::max(rec.horizon_end, r.end);
    rec.jobs.push_back(r);
  }
  return rec;
}

ScheduleMetrics SchedulingEnv::metrics() const {
  return compute_metrics(record(), sequence_.cluster_size);
}

ScheduleRecord simulate(const JobSequence& sequence, SchedulerPolicy& scheduler, bool backfilling) {
  EnvOptions options;
  options.backfilling = backfilling;
  SchedulingEnv env(options);
  env.reset(sequence);
  while (!env.done()) {
    const std::size_t index = scheduler.select(env.context());
    env.apply(index);
  }
  return env.record();
}

ScheduleMetrics run_with_scheduler(const JobSequence& sequence, SchedulerPolicy& scheduler,
                                   bool backfilling) {
  return compute_metrics(simulate(sequence, scheduler, backfilling), sequence.cluster_size);
}

}  // namespace rlsched
