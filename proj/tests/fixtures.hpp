#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "rlsched/simulator.hpp"
#include "rlsched/workload.hpp"

namespace fixtures {

using rlsched::Job;
using rlsched::JobSequence;
using rlsched::Seconds;

inline std::string data_path(const std::string& name) {
  return std::string(RLSCHED_TEST_DATA_DIR) + "/" + name;
}

// Small job set on a small cluster: integer times, some runtimes longer than
// the request (cut by the walltime limit) and some zero.
inline JobSequence tiny_sequence(std::mt19937_64& rng, std::size_t n_jobs, int cluster_size,
                                 Seconds max_gap = 4, Seconds max_request = 8) {
  std::uniform_int_distribution<Seconds> gap(0, max_gap), req(1, max_request);
  std::uniform_int_distribution<int> procs(1, cluster_size), user(0, 2);
  std::uniform_int_distribution<int> shape(0, 9);
  std::vector<Job> jobs;
  Seconds t = 0;
  for (std::size_t i = 0; i < n_jobs; ++i) {
    t += gap(rng);
    Job j;
    j.job_id = static_cast<std::int64_t>(i + 1);
    j.submit_time = t;
    j.requested_time = req(rng);
    const int s = shape(rng);
    if (s == 0) {
      j.actual_runtime = 0;
    } else if (s == 1) {
      j.actual_runtime = j.requested_time + 3;
    } else {
      j.actual_runtime = std::uniform_int_distribution<Seconds>(1, j.requested_time)(rng);
    }
    j.requested_processors = procs(rng);
    j.user_id = user(rng);
    jobs.push_back(j);
  }
  return JobSequence::from_jobs(std::move(jobs), cluster_size);
}

// Pending queue with arbitrary waits, requests and processor counts.
inline std::vector<rlsched::PendingJob> random_queue(std::mt19937_64& rng, std::size_t n,
                                                     Seconds now, int cluster_size,
                                                     Seconds max_request = 20000) {
  std::uniform_int_distribution<Seconds> wait(0, now), req(0, max_request);
  std::uniform_int_distribution<int> procs(1, cluster_size);
  std::vector<rlsched::PendingJob> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = q[i];
    p.wait_so_far = wait(rng);
    p.job.job_id = static_cast<std::int64_t>(i + 1);
    p.job.submit_time = now - p.wait_so_far;
    p.job.requested_time = req(rng);
    p.job.actual_runtime = p.job.requested_time;
    p.job.requested_processors = procs(rng);
  }
  return q;
}

// Cluster with some running jobs whose estimated ends lie after `now`.
inline rlsched::ClusterState random_cluster(std::mt19937_64& rng, int total, Seconds now,
                                            Seconds max_remaining = 20) {
  auto cluster = rlsched::ClusterState::idle(total);
  std::uniform_int_distribution<int> count(0, 4);
  std::uniform_int_distribution<Seconds> remaining(1, max_remaining);
  const int k = count(rng);
  for (int i = 0; i < k && cluster.free_processors > 0; ++i) {
    const int p = std::uniform_int_distribution<int>(1, cluster.free_processors)(rng);
    cluster.start(1000 + i, now + remaining(rng), p);
  }
  return cluster;
}

// Observation with random features and a random legal mask (at least one
// legal slot).
inline rlsched::ObservationMatrix random_observation(std::mt19937_64& rng, int capacity,
                                                     int occupied = -1) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (occupied < 0) occupied = std::uniform_int_distribution<int>(1, capacity)(rng);
  rlsched::ObservationMatrix obs(capacity);
  std::bernoulli_distribution legal(0.7);
  const int forced = std::uniform_int_distribution<int>(0, occupied - 1)(rng);
  for (int s = 0; s < occupied; ++s) {
    std::vector<double> row(rlsched::kJobFeatures);
    for (auto& x : row) x = u(rng);
    row[rlsched::kCanRunNow] = u(rng) < 0.5 ? 0.0 : 1.0;
    obs.push_row(row, s == forced || legal(rng), static_cast<std::size_t>(s));
  }
  return obs;
}

}  // namespace fixtures
