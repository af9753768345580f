#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rlsched/errors.hpp"
#include "rlsched/heuristics.hpp"
#include "rlsched/simulator.hpp"

using namespace rlsched;

TEST_CASE("simulator matches the straight-line oracle on tiny instances") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto seq = fixtures::tiny_sequence(rng, n, 4);
    for (auto kind : {HeuristicKind::FCFS, HeuristicKind::SJF, HeuristicKind::WFP3}) {
      for (bool bf : {false, true}) {
        HeuristicScheduler sched(kind);
        const auto rec = simulate(seq, sched, bf);
        const auto want = oracle::simulate(seq, kind, bf);
        REQUIRE(rec.jobs.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(rec.jobs[i].start == want.start[i]);
          CHECK(rec.jobs[i].end == want.end[i]);
        }
      }
    }
  }
}

TEST_CASE("compute_reservation matches a second-by-second scan") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const Seconds now = 100;
    const auto cluster = fixtures::random_cluster(rng, 8, now);
    const int need = std::uniform_int_distribution<int>(1, 8)(rng);
    std::vector<oracle::Running> running;
    for (const auto& r : cluster.running) running.push_back({r.job_id, r.completion_time, r.completion_time, r.processors});
    const auto want = oracle::reserve(8, running, need, now);
    const auto got = compute_reservation(cluster, need, now);
    CHECK(got.start == want.start);
    CHECK(got.spare == want.free_then - need);
  }
}

TEST_CASE("backfill_pass picks the lexicographically first no-delay subset") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const Seconds now = 50;
    auto cluster = fixtures::random_cluster(rng, 8, now);
    const int need = std::uniform_int_distribution<int>(1, 8)(rng);
    auto queue = fixtures::random_queue(rng, std::uniform_int_distribution<std::size_t>(0, 7)(rng), now, 8, 30);
    std::vector<oracle::Running> running;
    for (const auto& r : cluster.running) running.push_back({r.job_id, r.completion_time, r.completion_time, r.processors});
    const auto res = compute_reservation(cluster, need, now);
    auto want = oracle::backfill_subset(8, running, oracle::reserve(8, running, need, now), need, queue, now);
    auto got = backfill_pass(cluster, res, queue, now);
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    CHECK(got == want);
    CHECK(cluster.conserved());
  }
}

TEST_CASE("backfilling never delays the reserved job") {
  std::mt19937_64 rng(13);
  std::size_t reservations = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto seq = fixtures::tiny_sequence(rng, 12, 8, 3, 10);
    EnvOptions opts;
    opts.backfilling = true;
    SchedulingEnv env(opts);
    env.reset(seq);
    HeuristicScheduler sched(trial % 2 ? HeuristicKind::SJF : HeuristicKind::FCFS);
    while (!env.done()) env.apply(sched.select(env.context()));
    for (const auto& r : env.reservations()) {
      CHECK(r.actual_start <= r.reserved_start);
      ++reservations;
    }
  }
  CHECK(reservations > 100);
}

TEST_CASE("an adversarial long-first sequence favours SJF") {
  // One long wide job arrives first, two short ones right after.
  std::vector<Job> jobs{{1, 0, 4, 1000, 1000, 0}, {2, 0, 4, 10, 10, 0}, {3, 0, 4, 10, 10, 0}};
  const auto seq = JobSequence::from_jobs(jobs, 4);
  HeuristicScheduler fcfs(HeuristicKind::FCFS), sjf(HeuristicKind::SJF);
  const auto f = run_with_scheduler(seq, fcfs, false);
  const auto s = run_with_scheduler(seq, sjf, false);
  // FCFS: waits 0, 1000, 1010 -> bsld 1, 101, 102; SJF: waits 0, 10, 20 -> 1, 2, 1.02
  CHECK(f.avg_bounded_slowdown == doctest::Approx((1.0 + 101.0 + 102.0) / 3.0));
  CHECK(s.avg_bounded_slowdown == doctest::Approx((1.0 + 2.0 + 1.02) / 3.0));
  CHECK(s.avg_bounded_slowdown <= f.avg_bounded_slowdown);
}

TEST_CASE("runtimes are cut at the requested walltime") {
  std::vector<Job> jobs{{1, 0, 2, 10, 50, 0}};
  const auto seq = JobSequence::from_jobs(jobs, 2);
  HeuristicScheduler fcfs(HeuristicKind::FCFS);
  const auto rec = simulate(seq, fcfs, true);
  CHECK(rec.jobs[0].runtime() == 10);
}

TEST_CASE("observation rows follow FCFS order and are normalized") {
  auto cluster = ClusterState::idle(10);
  cluster.start(99, 500, 6);
  std::vector<PendingJob> queue{{{7, 30, 8, 200, 200, 0}, 70}, {{3, 10, 2, 50, 50, 0}, 90}, {{5, 10, 4, 2000, 2000, 0}, 90}};
  const auto obs = build_observation(queue, cluster, 100, 1000);
  REQUIRE(obs.occupied() == 3);
  CHECK(obs.capacity() == kDefaultMaxObsvSize);
  CHECK(obs.queue_index(0) == 1);  // submit 10, id 3
  CHECK(obs.queue_index(1) == 2);  // submit 10, id 5
  CHECK(obs.queue_index(2) == 0);
  CHECK(obs.at(0, kWait) == doctest::Approx(0.09));
  CHECK(obs.at(0, kRequestedTime) == doctest::Approx(0.05));
  CHECK(obs.at(1, kRequestedTime) == 1.0);  // clipped
  CHECK(obs.at(0, kProcessors) == doctest::Approx(0.2));
  CHECK(obs.at(0, kCanRunNow) == 1.0);
  CHECK(obs.at(2, kCanRunNow) == 0.0);
  CHECK(obs.at(2, kFreeProcessors) == doctest::Approx(0.4));
  CHECK(obs.legal_count() == 3);
  CHECK_FALSE(obs.legal(3));
  CHECK(obs.at(50, kWait) == 0.0);
  CHECK(obs.dense().size() == static_cast<std::size_t>(kDefaultMaxObsvSize * kJobFeatures));

  const auto masked = build_observation(queue, cluster, 100, 1000, {.mask_non_runnable = true});
  CHECK(masked.legal(0));
  CHECK(masked.legal(1));
  CHECK_FALSE(masked.legal(2));

  cluster.start(100, 600, 4);  // nothing fits: everything stays legal
  CHECK(build_observation(queue, cluster, 100, 1000, {.mask_non_runnable = true}).legal_count() == 3);

  const auto small = build_observation(queue, cluster, 100, 1000, {.max_obsv_size = 2});
  CHECK(small.occupied() == 2);
  CHECK(small.queue_index(1) == 2);
}

TEST_CASE("step interface: legality, single terminal reward") {
  std::mt19937_64 rng(2);
  const auto seq = fixtures::tiny_sequence(rng, 30, 8, 2, 20);
  SchedulingEnv env;
  auto obs = env.reset(seq);
  CHECK_THROWS_AS(env.step(obs.occupied()), IllegalAction);
  int steps = 0, nonzero = 0;
  while (!env.done()) {
    const auto t = env.step(0);
    ++steps;
    if (t.reward != 0.0) {
      ++nonzero;
      CHECK(t.done);
      CHECK(t.reward == -env.metrics().avg_bounded_slowdown);
    }
    CHECK(env.cluster().conserved());
  }
  CHECK(nonzero == 1);
  CHECK(steps == static_cast<int>(env.selection_order().size()));
  CHECK(env.start_order().size() == 30);
  CHECK_THROWS_AS(env.step(0), IllegalAction);
  CHECK_THROWS_AS(env.reset(JobSequence{}), EmptyTrace);
}
