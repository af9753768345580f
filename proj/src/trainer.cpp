#include "rlsched/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rlsched/csv.hpp"
#include "rlsched/errors.hpp"
#include "rlsched/heuristics.hpp"
#include "rlsched/parallel.hpp"

namespace rlsched {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

template <typename Fn>
Batch collect_with(const PpoConfig& config, Fn&& run_one, int threads) {
  const std::size_t n = config.trajectories_per_epoch;
  Batch batch;
  batch.trajectories.resize(n);
  std::vector<std::size_t> rejections(n, 0);
  std::vector<std::exception_ptr> errors(n);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      batch.trajectories[i] = run_one(i, &rejections[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < n; ++i) {
    batch.rejections += rejections[i];
    if (batch.trajectories[i].filter_cap_hit) ++batch.cap_accepts;
  }
  return batch;
}

}  // namespace

void PpoConfig::validate() const {
  if (trajectories_per_epoch < 1) throw ConfigError("trajectories_per_epoch must be positive");
  if (trajectory_len < 1) throw ConfigError("trajectory_len must be positive");
  if (policy_iterations < 1 || value_iterations < 1) {
    throw ConfigError("update iterations must be positive");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw ConfigError("clip_ratio must lie in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0,1]");
  if (!(target_kl > 0.0)) throw ConfigError("target_kl must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (rejection_cap < 1) throw ConfigError("rejection_cap must be positive");
  if (observation.max_obsv_size < 1) throw ConfigError("max_obsv_size must be positive");
  if (filter && !filter_range && filter_samples < 30) {
    throw ConfigError("filter_samples must be at least 30");
  }
  if (filter_range && !(filter_range->low < filter_range->high)) {
    throw ConfigError("filter range must satisfy low < high");
  }
}

std::size_t Batch::step_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0),
      v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

void LearningCurve::write_csv(std::ostream& out) const {
  CsvTable table;
  table.header = {"epoch", "mean_metric", "std_metric", "policy_loss", "value_loss", "seconds"};
  for (const auto& r : rows) {
    table.rows.push_back({std::to_string(r.epoch), format_double(r.mean_metric),
                          format_double(r.std_metric), format_double(r.policy_loss),
                          format_double(r.value_loss), format_double(r.seconds)});
  }
  write_csv_table(out, table);
}

LearningCurve LearningCurve::read_csv(std::istream& in) {
  const CsvTable table = read_csv_table(in);
  LearningCurve curve;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    EpochRow r;
    r.epoch = static_cast<int>(table.number(i, "epoch"));
    r.mean_metric = table.number(i, "mean_metric");
    r.std_metric = table.number(i, "std_metric");
    r.policy_loss = table.number(i, "policy_loss");
    r.value_loss = table.number(i, "value_loss");
    r.seconds = table.number(i, "seconds");
    curve.rows.push_back(r);
  }
  return curve;
}

FilterRange filter_range_from_samples(std::vector<double> samples) {
  if (samples.empty()) throw ConfigError("no samples for the filter range");
  const double mean = mean_of(samples);
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const double median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  return {median, 2.0 * mean};
}

FilterRange compute_filter_range(const JobTrace& trace, Goal goal, std::size_t n_samples,
                                 std::uint64_t seed, std::size_t sequence_length,
                                 std::vector<double>* samples_out) {
  if (n_samples < 30) throw ConfigError("filter range needs at least 30 samples");
  std::mt19937_64 rng(seed);
  HeuristicScheduler sjf(HeuristicKind::SJF);
  std::vector<double> samples;
  samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const JobSequence seq = sample_sequence(trace, sequence_length, rng());
    samples.push_back(goal_metric(run_with_scheduler(seq, sjf, true), goal));
  }
  if (samples_out) *samples_out = samples;
  return filter_range_from_samples(std::move(samples));
}

std::uint64_t trajectory_seed(std::uint64_t seed, int epoch, std::size_t index) {
  return mix(mix(seed ^ mix(static_cast<std::uint64_t>(epoch) + 1)) ^ (index + 1));
}

Trajectory run_trajectory(const JobTrace& trace, const PolicyNet& policy, const ValueNet& value,
                          const PpoConfig& config, std::uint64_t seed, const FilterRange* filter,
                          std::size_t* rejections) {
  std::mt19937_64 rng(seed);
  Trajectory traj;
  HeuristicScheduler sjf(HeuristicKind::SJF);

  JobSequence seq;
  for (int attempts = 1;; ++attempts) {
    seq = sample_sequence(trace, config.trajectory_len, rng());
    if (!filter) break;
    const double m = goal_metric(run_with_scheduler(seq, sjf, true), config.goal);
    if (filter->contains(m)) break;
    if (attempts >= config.rejection_cap) {
      traj.filter_cap_hit = true;
      break;
    }
    if (rejections) ++*rejections;
  }
  traj.sequence_offset = seq.offset;
  traj.sequence_hash = sequence_hash(seq);

  SchedulingEnv env({config.backfilling, config.goal, config.observation});
  env.reset(std::move(seq));
  PolicyWorkspace pws;
  ValueWorkspace vws;
  while (!env.done()) {
    const ObservationMatrix& obs = env.observation();
    TrajectoryStep step;
    step.action = policy_sample(policy_forward(policy, obs), rng);
    step.log_prob = policy_log_prob(policy, obs, step.action, pws);
    step.value = value_forward(value, obs, vws);
    const std::size_t queue_index = obs.queue_index(step.action);
    step.observation = obs;
    step.reward = env.apply(queue_index).reward;
    traj.steps.push_back(std::move(step));
  }
  traj.metric = goal_metric(env.metrics(), config.goal);
  return traj;
}

Batch collect_trajectories(const JobTrace& trace, const PolicyNet& policy, const ValueNet& value,
                           const PpoConfig& config, int epoch, const FilterRange* filter) {
  return collect_with(
      config,
      [&](std::size_t i, std::size_t* rejections) {
        return run_trajectory(trace, policy, value, config, trajectory_seed(config.seed, epoch, i),
                              filter, rejections);
      },
      config.workers);
}

namespace serial {

Batch collect_trajectories(const JobTrace& trace, const PolicyNet& policy, const ValueNet& value,
                           const PpoConfig& config, int epoch, const FilterRange* filter) {
  Batch batch;
  for (std::size_t i = 0; i < config.trajectories_per_epoch; ++i) {
    std::size_t rejections = 0;
    batch.trajectories.push_back(run_trajectory(trace, policy, value, config,
                                                trajectory_seed(config.seed, epoch, i), filter,
                                                &rejections));
    batch.rejections += rejections;
    if (batch.trajectories.back().filter_cap_hit) ++batch.cap_accepts;
  }
  return batch;
}

}  // namespace serial

Advantages compute_advantages(const Batch& batch, double gamma, double lambda) {
  Advantages out;
  const std::size_t total = batch.step_count();
  out.raw.reserve(total);
  out.returns.reserve(total);
  for (const auto& traj : batch.trajectories) {
    const std::size_t n = traj.steps.size();
    std::vector<double> adv(n), ret(n);
    double gae = 0.0;
    double reward_to_go = 0.0;
    for (std::size_t t = n; t-- > 0;) {
      const double next_value = t + 1 < n ? traj.steps[t + 1].value : 0.0;
      const double delta = traj.steps[t].reward + gamma * next_value - traj.steps[t].value;
      gae = delta + gamma * lambda * gae;
      adv[t] = gae;
      reward_to_go = traj.steps[t].reward + gamma * reward_to_go;
      ret[t] = reward_to_go;
    }
    out.raw.insert(out.raw.end(), adv.begin(), adv.end());
    out.returns.insert(out.returns.end(), ret.begin(), ret.end());
  }
  const double m = mean_of(out.raw);
  const double s = stddev_of(out.raw);
  out.normalized.resize(out.raw.size());
  for (std::size_t i = 0; i < out.raw.size(); ++i) {
    out.normalized[i] = s > 0.0 ? (out.raw[i] - m) / s : out.raw[i] - m;
  }
  return out;
}

UpdateStats ppo_update(PolicyNet& policy, ValueNet& value, Adam& policy_opt, Adam& value_opt,
                       const Batch& batch, const Advantages& advantages, const PpoConfig& config) {
  std::vector<SampleRef> samples;
  samples.reserve(batch.step_count());
  std::size_t k = 0;
  for (const auto& traj : batch.trajectories) {
    for (const auto& step : traj.steps) {
      samples.push_back({&step.observation, step.action, step.log_prob, advantages.normalized[k],
                         advantages.returns[k]});
      ++k;
    }
  }

  const PolicyNet policy_backup = policy;
  const ValueNet value_backup = value;
  const Adam policy_opt_backup = policy_opt;
  const Adam value_opt_backup = value_opt;
  auto diverged = [&](const char* what) {
    policy = policy_backup;
    value = value_backup;
    policy_opt = policy_opt_backup;
    value_opt = value_opt_backup;
    throw TrainingDiverged(std::string(what) + " became non-finite");
  };

  UpdateStats stats;
  for (int it = 0; it < config.policy_iterations; ++it) {
    PolicyLoss pl = policy_loss_and_grad(policy, samples, config.clip_ratio, config.workers);
    if (!std::isfinite(pl.loss) || !all_finite(pl.grad)) diverged("policy loss");
    if (it == 0) stats.policy_loss = pl.loss;
    stats.kl = pl.kl;
    if (pl.kl > config.target_kl) break;
    policy_opt.step(policy.kernel.params(), pl.grad);
    ++stats.policy_iterations;
  }
  if (!all_finite(policy.kernel.params())) diverged("policy parameters");

  for (int it = 0; it < config.value_iterations; ++it) {
    ValueLoss vl = value_loss_and_grad(value, samples, config.workers);
    if (!std::isfinite(vl.loss) || !all_finite(vl.grad)) diverged("value loss");
    if (it == 0) stats.value_loss = vl.loss;
    value_opt.step(value.mlp.params(), vl.grad);
  }
  if (!all_finite(value.mlp.params())) diverged("value parameters");
  return stats;
}

TrainResult train(const JobTrace& trace, const PpoConfig& config,
                  const std::function<void(const EpochRow&)>& on_epoch) {
  config.validate();
  if (config.goal == Goal::FairMaxUserBsld && !trace.has_user_info()) {
    throw MissingUserInfo("fairness goal needs a trace with user ids");
  }
  if (config.trajectory_len > trace.jobs.size()) {
    throw InsufficientJobs("trace has fewer jobs than trajectory_len");
  }

  const int max_obsv = config.observation.max_obsv_size;
  TrainResult result{PolicyNet::make(mix(config.seed ^ 0x5150), max_obsv),
                     ValueNet::make(mix(config.seed ^ 0x7a1e), max_obsv),
                     {}, {}, -1, {}, std::nullopt, 0};
  result.best_policy = result.policy;
  result.best_value = result.value;
  Adam policy_opt(result.policy.parameter_count(), config.learning_rate);
  Adam value_opt(result.value.parameter_count(), config.learning_rate);

  if (config.filter) {
    result.filter_range = config.filter_range
                              ? *config.filter_range
                              : compute_filter_range(trace, config.goal, config.filter_samples,
                                                     mix(config.seed ^ 0xf117e5),
                                                     config.trajectory_len);
  }
  const int step1_epochs = config.filter_step1_epochs < 0 ? config.epochs / 2
                                                          : config.filter_step1_epochs;

  double best_reward = -std::numeric_limits<double>::infinity();
  int consecutive_failures = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const bool phase1 = result.filter_range && epoch < step1_epochs;
    const FilterRange* filter = phase1 ? &*result.filter_range : nullptr;

    Batch batch = collect_trajectories(trace, result.policy, result.value, config, epoch, filter);
    result.cap_accepts += batch.cap_accepts;

    std::vector<double> metrics;
    for (const auto& t : batch.trajectories) metrics.push_back(t.metric);
    const double mean_metric = mean_of(metrics);
    const double reward = goal_minimizes(config.goal) ? -mean_metric : mean_metric;
    if (reward > best_reward) {
      best_reward = reward;
      result.best_policy = result.policy;
      result.best_value = result.value;
      result.best_epoch = epoch + 1;
    }

    const Advantages adv = compute_advantages(batch, config.gamma, config.gae_lambda);
    UpdateStats stats;
    try {
      stats = ppo_update(result.policy, result.value, policy_opt, value_opt, batch, adv, config);
      consecutive_failures = 0;
    } catch (const TrainingDiverged&) {
      if (++consecutive_failures >= 3) throw;
      stats.policy_loss = stats.value_loss = std::numeric_limits<double>::quiet_NaN();
    }

    EpochRow row;
    row.epoch = epoch + 1;
    row.mean_metric = mean_metric;
    row.std_metric = stddev_of(metrics);
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.curve.rows.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

}  // namespace rlsched
