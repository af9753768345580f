// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "rlsched/csv.hpp"
#include "rlsched/evaluate.hpp"
#include "rlsched/heuristics.hpp"
#include "rlsched/metrics.hpp"
#include "rlsched/model_io.hpp"
#include "rlsched/trainer.hpp"

namespace fs = std::filesystem;
using namespace rlsched;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome metric_formulas() {
  const bool exact = bounded_slowdown(0, 100) == 1.0 && bounded_slowdown(90, 10) == 10.0 &&
                     bounded_slowdown(5, 1) == 1.0;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto seq = fixtures::tiny_sequence(rng, 40, 16, 30, 500);
    HeuristicScheduler sched(kAllHeuristics[static_cast<std::size_t>(i) % kAllHeuristics.size()]);
    const auto m = run_with_scheduler(seq, sched, i % 2 == 0);
    const double rhs = m.avg_wait + m.avg_runtime;
    worst = std::max(worst, std::abs(m.avg_turnaround - rhs) / std::max(1.0, std::abs(rhs)));
  }
  const bool precise = worst <= 4 * std::numeric_limits<double>::epsilon();
  return {exact && precise, "bsld hand values " + std::string(exact ? "exact" : "wrong") +
                                "; max rel |turnaround - (wait + runtime)| = " + fmt("%.3g", worst)};
}

std::string find_sdsc_sp2() {
  if (const char* env = std::getenv("RLSCHED_SDSC_SP2")) return env;
  for (const char* name : {"SDSC-SP2-1998-4.2-cln.swf", "SDSC-SP2.swf"}) {
    const auto p = fixtures::data_path(name);
    if (fs::exists(p)) return p;
  }
  return {};
}

CsvTable stats_via_cli(const std::string& path, const std::string& max_jobs) {
  std::vector<std::string> args{"rlsched", "stats", path, "--max-jobs", max_jobs};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  if (cli::run(static_cast<int>(argv.size()), argv.data(), out, err) != 0) {
    throw std::runtime_error("stats failed: " + err.str());
  }
  std::istringstream in(out.str());
  return read_csv_table(in);
}

Outcome trace_fidelity() {
  const auto sdsc = find_sdsc_sp2();
  if (!sdsc.empty() && fs::exists(sdsc)) {
    const auto t = stats_via_cli(sdsc, "10000");
    const double want[] = {128, 1055, 6687, 11};
    const char* cols[] = {"size", "i_t", "r_t", "n_t"};
    bool ok = true;
    std::string got;
    for (int i = 0; i < 4; ++i) {
      const double v = std::round(t.number(0, cols[i]));
      ok = ok && std::abs(v - want[i]) <= 1.0;
      got += std::string(i ? " " : "") + fmt("%.0f", v);
    }
    return {ok, "SDSC-SP2 first 10K jobs: " + got + " (expected 128 1055 6687 11 +-1)"};
  }
  const auto t = stats_via_cli(fixtures::data_path("mini200.swf"), "0");
  const bool ok = t.number(0, "size") == 32 && std::abs(t.number(0, "i_t") - 60.0) < 1e-9 &&
                  std::abs(t.number(0, "r_t") - 550.0) < 1e-9 &&
                  std::abs(t.number(0, "n_t") - 6.2) < 1e-9 && t.number(0, "dropped") == 2;
  return {ok, "SDSC-SP2 not present; bundled mini trace: size=" + fmt("%.0f", t.number(0, "size")) +
                  " i_t=" + fmt("%.6g", t.number(0, "i_t")) + " r_t=" + fmt("%.6g", t.number(0, "r_t")) +
                  " n_t=" + fmt("%.6g", t.number(0, "n_t")) + " (hand: 32 60 550 6.2)"};
}

Outcome permutation_equivariance() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto net = PolicyNet::make(rng());
    const auto obs = fixtures::random_observation(rng, kDefaultMaxObsvSize);
    std::vector<int> perm(static_cast<std::size_t>(obs.occupied()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ObservationMatrix shuffled(obs.capacity());
    for (int s = 0; s < obs.occupied(); ++s) shuffled.push_row(obs.row(perm[s]), obs.legal(perm[s]), s);
    const auto p = policy_forward(net, obs);
    const auto q = policy_forward(net, shuffled);
    for (int s = 0; s < obs.occupied(); ++s) worst = std::max(worst, std::abs(q[s] - p[perm[s]]));
    for (int s = obs.occupied(); s < obs.capacity(); ++s) worst = std::max(worst, std::abs(q[s] - p[s]));
  }
  return {worst < 1e-6, "max abs deviation " + fmt("%.3g", worst) + " over 1000 observations"};
}

Outcome masked_softmax_check() {
  std::mt19937_64 rng(404);
  const auto net = PolicyNet::make(4);
  double worst_sum = 0.0;
  bool zeros = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto obs = fixtures::random_observation(rng, kDefaultMaxObsvSize);
    const auto p = policy_forward(net, obs);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
    for (int s = 0; s < obs.capacity(); ++s) {
      if (!obs.legal(s) && p[s] != 0.0) zeros = false;
    }
  }
  return {worst_sum <= 1e-6 && zeros, "max |sum - 1| = " + fmt("%.3g", worst_sum) +
                                          (zeros ? "; masked slots exactly 0" : "; nonzero masked slot")};
}

Outcome gradient_check() {
  std::mt19937_64 rng(505);
  double pol = 0.0, lp = 0.0, val = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = gradcheck::check_once(rng);
    pol = std::max(pol, r.policy);
    lp = std::max(lp, r.log_prob);
    val = std::max(val, r.value);
  }
  return {pol < 1e-4 && lp < 1e-4 && val < 1e-4,
          "max rel error policy " + fmt("%.3g", pol) + ", log-prob " + fmt("%.3g", lp) + ", value " +
              fmt("%.3g", val) + " (100 triples)"};
}

Outcome parameter_budget() {
  const auto n = PolicyNet::make(0).parameter_count();
  return {n == 865 && n < 1000, "default policy parameters: " + std::to_string(n)};
}

// Bit-for-bit metrics computed from oracle start/end times.
ScheduleMetrics oracle_metrics(const JobSequence& seq, const oracle::SimOutcome& o) {
  ScheduleMetrics m;
  double bsld = 0.0, sld = 0.0;
  Seconds wait = 0, run = 0;
  for (std::size_t i = 0; i < seq.jobs.size(); ++i) {
    const Seconds w = o.start[i] - seq.jobs[i].submit_time;
    const Seconds r = o.end[i] - o.start[i];
    bsld += std::max(static_cast<double>(w + r) / static_cast<double>(std::max<Seconds>(r, 10)), 1.0);
    sld += static_cast<double>(w + r) / static_cast<double>(std::max<Seconds>(r, 1));
    wait += w;
    run += r;
  }
  const double n = static_cast<double>(seq.jobs.size());
  m.avg_bounded_slowdown = bsld / n;
  m.avg_slowdown = sld / n;
  m.avg_wait = static_cast<double>(wait) / n;
  m.avg_runtime = static_cast<double>(run) / n;
  m.avg_turnaround = static_cast<double>(wait + run) / n;
  return m;
}

Outcome simulator_oracle() {
  std::mt19937_64 rng(707);
  int mismatches = 0, runs = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto seq = fixtures::tiny_sequence(rng, n, 4);
    for (auto kind : kAllHeuristics) {
      for (bool bf : {false, true}) {
        HeuristicScheduler sched(kind);
        const auto got = run_with_scheduler(seq, sched, bf);
        const auto want = oracle_metrics(seq, oracle::simulate(seq, kind, bf));
        ++runs;
        if (got.avg_bounded_slowdown != want.avg_bounded_slowdown || got.avg_slowdown != want.avg_slowdown ||
            got.avg_wait != want.avg_wait || got.avg_runtime != want.avg_runtime ||
            got.avg_turnaround != want.avg_turnaround) {
          ++mismatches;
        }
      }
    }
  }
  int bf_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Seconds now = 40;
    auto cluster = fixtures::random_cluster(rng, 4, now, 10);
    const int need = std::uniform_int_distribution<int>(1, 4)(rng);
    const auto queue = fixtures::random_queue(rng, std::uniform_int_distribution<std::size_t>(0, 6)(rng), now, 4, 15);
    std::vector<oracle::Running> running;
    for (const auto& r : cluster.running) running.push_back({r.job_id, r.completion_time, r.completion_time, r.processors});
    auto want = oracle::backfill_subset(4, running, oracle::reserve(4, running, need, now), need, queue, now);
    auto got = backfill_pass(cluster, compute_reservation(cluster, need, now), queue, now);
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want != got) ++bf_mismatch;
  }
  return {mismatches == 0 && bf_mismatch == 0,
          std::to_string(mismatches) + "/" + std::to_string(runs) + " metric mismatches, " +
              std::to_string(bf_mismatch) + "/200 backfill subset mismatches"};
}

Outcome backfill_safety() {
  std::mt19937_64 rng(808);
  std::size_t checked = 0, late = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto seq = fixtures::tiny_sequence(rng, 16, 8, 3, 12);
    EnvOptions opts;
    opts.backfilling = true;
    SchedulingEnv env(opts);
    env.reset(seq);
    HeuristicScheduler sched(kAllHeuristics[static_cast<std::size_t>(trial) % kAllHeuristics.size()]);
    while (!env.done()) env.apply(sched.select(env.context()));
    for (const auto& r : env.reservations()) {
      ++checked;
      if (r.actual_start > r.reserved_start) ++late;
    }
  }
  return {late == 0 && checked > 0, std::to_string(late) + " late starts among " + std::to_string(checked) +
                                        " reservations in 10000 scenarios"};
}

Outcome heuristic_selection() {
  std::mt19937_64 rng(909);
  int wrong = 0, non_finite = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Seconds now = std::uniform_int_distribution<Seconds>(0, 200000)(rng);
    auto queue = fixtures::random_queue(rng, std::uniform_int_distribution<std::size_t>(1, 64)(rng), now, 128);
    // degenerate jobs: zero request, single processor, submitted at 0, no wait
    queue.front().job.requested_time = 0;
    queue.front().job.requested_processors = 1;
    queue.back().job.submit_time = 0;
    queue.back().wait_so_far = now;
    std::vector<Job> jobs;
    for (const auto& p : queue) jobs.push_back(p.job);
    for (auto kind : kAllHeuristics) {
      if (select(kind, queue, now) != oracle::argmin(kind, jobs, now)) ++wrong;
      for (const auto& p : queue) {
        if (!std::isfinite(score(kind, p, now))) ++non_finite;
      }
    }
  }
  return {wrong == 0 && non_finite == 0,
          std::to_string(wrong) + " selection mismatches, " + std::to_string(non_finite) + " non-finite scores"};
}

Outcome filter_range_stats() {
  SyntheticConfig cfg;
  cfg.job_count = 3000;
  const auto trace = generate_synthetic(cfg, 21);
  int wrong = 0;
  std::mt19937_64 rng(1010);
  for (int run = 0; run < 100; ++run) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(30, 41)(rng);
    std::vector<double> samples;
    const auto range = compute_filter_range(trace, Goal::AvgBoundedSlowdown, n, rng(), 128, &samples);
    if (samples.size() != n || range.low != oracle::median(samples) || range.high != 2.0 * oracle::mean(samples)) {
      ++wrong;
    }
  }
  return {wrong == 0, std::to_string(wrong) + "/100 runs differ from independent order statistics"};
}

// ---------------------------------------------------------------------------

struct ConvergenceSettings {
  int epochs = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir;
};

Outcome desk_convergence(const ConvergenceSettings& s) {
  SyntheticConfig cfg;  // 256 processors, 10K jobs
  const auto trace = generate_synthetic(cfg, 7);
  if (!s.out_dir.empty()) fs::create_directories(s.out_dir);

  std::vector<SchedulerFactory> heuristics;
  for (auto k : kAllHeuristics) {
    heuristics.push_back({std::string(heuristic_name(k)), [k] { return std::make_unique<HeuristicScheduler>(k); }});
  }
  EvaluationSpec spec;
  spec.sequence_length = 256;
  spec.repetitions = 10;
  spec.backfilling = true;
  spec.seed = 2024;

  bool all = true;
  std::string detail;
  for (auto seed : s.seeds) {
    PpoConfig c;
    c.epochs = s.epochs;
    c.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train(trace, c, [&](const EpochRow& row) {
      std::fprintf(stderr, "  seed %llu epoch %d bsld %.3f\n", static_cast<unsigned long long>(seed), row.epoch,
                   row.mean_metric);
    });
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    const double first = result.curve.rows.front().mean_metric;
    const double last = result.curve.rows.back().mean_metric;
    const bool improved = last < first;

    auto schedulers = heuristics;
    const PolicyNet net = result.policy;
    schedulers.push_back({"learned", [net] { return std::make_unique<PolicyScheduler>(net, "learned"); }});
    const auto eval = evaluate_schedulers(trace, schedulers, spec);
    const double fcfs = eval.mean_goal_metric[0];
    const double best = *std::min_element(eval.mean_goal_metric.begin(), eval.mean_goal_metric.end() - 1);
    const double learned = eval.mean_goal_metric.back();
    const bool beats = learned <= fcfs && learned <= 1.5 * best;
    all = all && improved && beats;
    detail += "seed " + std::to_string(seed) + ": epoch1 " + fmt("%.2f", first) + " -> final " + fmt("%.2f", last) +
              ", eval learned " + fmt("%.2f", learned) + " fcfs " + fmt("%.2f", fcfs) + " best-heuristic " +
              fmt("%.2f", best) + " (" + fmt("%.1f", minutes) + " min); ";

    if (!s.out_dir.empty()) {
      const auto dir = fs::path(s.out_dir) / ("seed" + std::to_string(seed));
      fs::create_directories(dir);
      std::ofstream curve(dir / "curve.csv");
      result.curve.write_csv(curve);
      save_checkpoint((dir / "final.rlm").string(), result.policy, result.value);
      std::ofstream table(dir / "evaluation.csv");
      CsvTable t;
      t.header = {"scheduler", "mean_bsld"};
      for (std::size_t i = 0; i < schedulers.size(); ++i) {
        t.rows.push_back({schedulers[i].name, format_double(eval.mean_goal_metric[i])});
      }
      write_csv_table(table, t);
    }
  }
  return {all, detail};
}

Outcome inference_latency() {
  std::mt19937_64 rng(1212);
  const auto net = PolicyNet::make(1);
  const int trials = 10000;
  double total_us = 0.0;
  std::uint64_t checksum = 0;
  for (int t = 0; t < trials; ++t) {
    const auto obs = fixtures::random_observation(rng, kDefaultMaxObsvSize, kDefaultMaxObsvSize);
    const auto t0 = std::chrono::steady_clock::now();
    const int a = policy_argmax(policy_forward(net, obs));
    total_us += std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
    checksum += static_cast<std::uint64_t>(a);
  }
  const double mean_ms = total_us / trials / 1000.0;
  return {mean_ms < 5.0, "mean argmax decision " + fmt("%.4f", mean_ms) + " ms over 10000 full 128-job observations"};
}

Outcome reward_timing() {
  SyntheticConfig cfg;
  const auto trace = generate_synthetic(cfg, 7);
  PpoConfig c;  // 100 trajectories of 256 jobs
  const auto batch = collect_trajectories(trace, PolicyNet::make(1), ValueNet::make(2), c, 0, nullptr);
  std::size_t bad = 0;
  for (const auto& traj : batch.trajectories) {
    std::size_t nonzero = 0;
    for (const auto& s : traj.steps) nonzero += s.reward != 0.0;
    if (nonzero != 1 || traj.steps.empty() || traj.steps.back().reward == 0.0) ++bad;
  }
  return {bad == 0 && batch.trajectories.size() == 100,
          std::to_string(bad) + "/" + std::to_string(batch.trajectories.size()) +
              " trajectories without exactly one final reward (" + std::to_string(batch.step_count()) + " steps)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only, skip;
  ConvergenceSettings conv;
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--skip", skip, "skip these criteria")->delimiter(',');
  app.add_option("--out", conv.out_dir, "directory for convergence artifacts");
  app.add_option("--epochs", conv.epochs, "epochs per convergence seed (criterion uses 50)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric formulas", metric_formulas},
      {"trace fidelity", trace_fidelity},
      {"permutation equivariance", permutation_equivariance},
      {"masked softmax", masked_softmax_check},
      {"gradient correctness", gradient_check},
      {"parameter budget", parameter_budget},
      {"simulator oracle equivalence", simulator_oracle},
      {"backfilling safety", backfill_safety},
      {"heuristic selection", heuristic_selection},
      {"filter-range statistics", filter_range_stats},
      {"desk-scale convergence", [&] { return desk_convergence(conv); }},
      {"inference latency", inference_latency},
      {"reward timing", reward_timing},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    if (std::find(skip.begin(), skip.end(), id) != skip.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
