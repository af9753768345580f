#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlsched/config.hpp"
#include "rlsched/csv.hpp"
#include "rlsched/errors.hpp"
#include "rlsched/evaluate.hpp"
#include "rlsched/heuristics.hpp"
#include "rlsched/model_io.hpp"
#include "rlsched/trainer.hpp"
#include "rlsched/workload.hpp"

namespace fs = std::filesystem;

namespace rlsched::cli {

namespace {

// ---------------------------------------------------------------------------
// Options that can also come from a config file. A key maps to the flag of
// the same name with '_' spelled as '-'; flags given on the command line win.

std::string to_text(const std::string& v) { return v; }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(double v) { return format_double(v); }
template <typename T>
  requires std::is_integral_v<T>
std::string to_text(T v) {
  return std::to_string(v);
}
std::string to_text(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

template <typename T>
void from_text(const std::string& key, const std::string& text, T& var) {
  if (!CLI::detail::lexical_cast(text, var)) {
    throw ConfigError("config key '" + key + "' has invalid value '" + text + "'");
  }
}
void from_text(const std::string&, const std::string& text, std::vector<std::string>& var) {
  var.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) var.push_back(item);
  }
}

struct Param {
  CLI::Option* option = nullptr;
  std::string key;
  std::string section;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)) {
    app_->add_option("--config", config_path_, "key = value file; flags override its entries");
  }

  template <typename T>
  CLI::Option* add(const std::string& key, T& var, const std::string& description,
                   const std::string& section = "") {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    auto* opt = app_->add_option(flag, var, description)->capture_default_str();
    if constexpr (std::is_same_v<T, std::vector<std::string>>) opt->delimiter(',');
    params_.push_back({opt, key, section, [key, &var](const std::string& text) { from_text(key, text, var); },
                       [&var] { return to_text(var); }});
    return opt;
  }

  CLI::App* app() const { return app_; }
  bool parsed() const { return app_->parsed(); }

  // Fills options not given on the command line from --config.
  void apply_config() {
    if (config_path_.empty()) return;
    const auto config = KeyValueConfig::load(config_path_);
    std::ifstream in(config_path_);
    for (const auto& p : params_) {
      if (p.option->count() == 0) {
        if (auto v = config.get(p.key)) p.set(*v);
      }
    }
    // Reject keys this command does not know, so typos do not pass silently.
    auto known = [this](const std::string& key) {
      return std::any_of(params_.begin(), params_.end(), [&](const Param& p) { return p.key == key; });
    };
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      if (!known(key)) throw ConfigError("line " + std::to_string(line_no) + ": unknown config key '" + key + "'");
    }
  }

  KeyValueConfig effective() const {
    KeyValueConfig cfg;
    for (const auto& p : params_) cfg.set(p.key, p.get(), p.section);
    return cfg;
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::vector<Param> params_;
};

// ---------------------------------------------------------------------------
// Trace selection shared by train, evaluate and gen.

struct TraceArgs {
  std::vector<std::string> traces;
  bool synthetic = false;
  SyntheticConfig synthetic_config;
  std::uint64_t trace_seed = 0;
  std::size_t max_jobs = 0;  // 0: all
  int cluster_size = 0;      // 0: from the trace header

  void add_synthetic_options(Command& cmd) {
    cmd.add("cluster_size", synthetic_config.cluster_size, "processors of the synthetic cluster", "synthetic");
    cmd.add("job_count", synthetic_config.job_count, "synthetic job count", "synthetic");
    cmd.add("arrival_rate", synthetic_config.arrival_rate, "synthetic arrivals per second", "synthetic");
    cmd.add("runtime_min", synthetic_config.runtime_min, "shortest synthetic runtime (s)", "synthetic");
    cmd.add("runtime_max", synthetic_config.runtime_max, "longest synthetic runtime (s)", "synthetic");
    cmd.add("proc_min", synthetic_config.proc_min, "smallest synthetic processor request", "synthetic");
    cmd.add("proc_max", synthetic_config.proc_max, "largest synthetic processor request", "synthetic");
    cmd.add("user_count", synthetic_config.user_count, "synthetic user count", "synthetic");
    cmd.add("trace_seed", trace_seed, "seed of the synthetic generator", "synthetic");
  }

  void add_options(Command& cmd, bool many) {
    cmd.add("trace", traces, many ? "SWF trace path(s), comma separated" : "SWF trace path", "trace");
    cmd.add("synthetic", synthetic, "use a generated trace instead of --trace", "trace");
    cmd.add("max_jobs", max_jobs, "keep only the first N jobs of each trace (0: all)", "trace");
    cmd.add("trace_cluster_size", cluster_size, "override the trace's MaxProcs (0: header)", "trace");
    add_synthetic_options(cmd);
  }

  std::vector<JobTrace> load() const {
    std::vector<JobTrace> out;
    if (synthetic) {
      if (!traces.empty()) throw ConfigError("--trace and --synthetic are exclusive");
      auto trace = generate_synthetic(synthetic_config, trace_seed);
      trace.source_name = "synthetic";
      if (max_jobs > 0 && trace.jobs.size() > max_jobs) trace.jobs.resize(max_jobs);
      out.push_back(std::move(trace));
      return out;
    }
    if (traces.empty()) throw ConfigError("no trace given; pass --trace or --synthetic");
    for (const auto& path : traces) {
      ParseOptions opts;
      if (cluster_size > 0) opts.cluster_size = cluster_size;
      if (max_jobs > 0) opts.max_jobs = max_jobs;
      opts.source_name = fs::path(path).stem().string();
      out.push_back(load_swf(path, opts));
    }
    return out;
  }
};

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  body(f);
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  TraceArgs trace;
  PpoConfig ppo;
  std::string goal = "bsld";
  std::string out_dir = "run";
  int max_obsv_size = kDefaultMaxObsvSize;
  bool mask_non_runnable = false;
  int epochs = 50;
  int workers = 1;
  long long seed = 0;
  std::size_t trajectories = 100;
  std::size_t trajectory_len = 256;
};

void add_train_options(Command& cmd, TrainArgs& a) {
  a.trace.add_options(cmd, false);
  cmd.add("goal", a.goal, "bsld, slowdown, wait, util or fair-bsld", "train");
  cmd.add("epochs", a.epochs, "training epochs", "train");
  cmd.add("seed", a.seed, "training seed", "train");
  cmd.add("workers", a.workers, "threads collecting trajectories", "train");
  cmd.add("trajectories", a.trajectories, "trajectories per epoch", "train");
  cmd.add("trajectory_len", a.trajectory_len, "jobs per trajectory", "train");
  cmd.add("policy_iterations", a.ppo.policy_iterations, "policy steps per epoch", "train");
  cmd.add("value_iterations", a.ppo.value_iterations, "value steps per epoch", "train");
  cmd.add("learning_rate", a.ppo.learning_rate, "Adam learning rate", "train");
  cmd.add("clip_ratio", a.ppo.clip_ratio, "PPO clip epsilon", "train");
  cmd.add("gamma", a.ppo.gamma, "discount", "train");
  cmd.add("gae_lambda", a.ppo.gae_lambda, "GAE lambda", "train");
  cmd.add("target_kl", a.ppo.target_kl, "KL early-stop threshold", "train");
  cmd.add("backfilling", a.ppo.backfilling, "EASY backfilling during training", "train");
  cmd.add("filter", a.ppo.filter, "trajectory filtering in the first phase", "train");
  cmd.add("filter_step1_epochs", a.ppo.filter_step1_epochs, "filtered epochs (-1: half)", "train");
  cmd.add("filter_samples", a.ppo.filter_samples, "SJF samples behind the filter range", "train");
  cmd.add("rejection_cap", a.ppo.rejection_cap, "filter attempts before accepting anyway", "train");
  cmd.add("max_obsv_size", a.max_obsv_size, "observation rows", "train");
  cmd.add("mask_non_runnable", a.mask_non_runnable, "mask jobs that cannot start now", "train");
  cmd.add("out", a.out_dir, "output directory", "train");
}

int cmd_train(const Command& cmd, TrainArgs& a, std::ostream& out, std::ostream& err) {
  std::string stage = "loading trace";
  try {
    auto traces = a.trace.load();
    if (traces.size() != 1) throw ConfigError("train takes exactly one trace");
    const auto& trace = traces.front();

    stage = "configuring";
    auto& c = a.ppo;
    c.goal = parse_goal(a.goal);
    c.epochs = a.epochs;
    c.workers = a.workers;
    c.seed = static_cast<std::uint64_t>(a.seed);
    c.trajectories_per_epoch = a.trajectories;
    c.trajectory_len = a.trajectory_len;
    c.observation.max_obsv_size = a.max_obsv_size;
    c.observation.mask_non_runnable = a.mask_non_runnable;
    c.validate();

    const fs::path dir(a.out_dir);
    fs::create_directories(dir / "checkpoints");
    const auto effective = cmd.effective();
    write_text(dir / "config.ini", [&](std::ostream& f) { effective.write(f); });

    stage = "training";
    LearningCurve curve;
    const auto result = train(trace, c, [&](const EpochRow& row) {
      curve.rows.push_back(row);
      write_text(dir / "curve.csv", [&](std::ostream& f) { curve.write_csv(f); });
      out << "epoch " << row.epoch << '/' << c.epochs << ' ' << goal_name(c.goal) << '='
          << std::fixed << std::setprecision(4) << row.mean_metric << " std=" << row.std_metric
          << " policy_loss=" << row.policy_loss << " value_loss=" << row.value_loss
          << std::setprecision(1) << " time=" << row.seconds << "s" << std::defaultfloat << '\n'
          << std::flush;
    });

    stage = "writing checkpoints";
    save_checkpoint((dir / "checkpoints" / "final.rlm").string(), result.policy, result.value);
    save_checkpoint((dir / "checkpoints" / "best.rlm").string(), result.best_policy, result.best_value);
    write_text(dir / "curve.csv", [&](std::ostream& f) { result.curve.write_csv(f); });
    write_text(dir / "manifest.txt", [&](std::ostream& f) {
      f << "command = train\n"
        << "goal = " << goal_name(c.goal) << '\n'
        << "trace = " << trace.source_name << '\n'
        << "trace_jobs = " << trace.jobs.size() << '\n'
        << "cluster_size = " << trace.cluster_size << '\n'
        << "config_hash = " << hex(effective.hash()) << '\n'
        << "epochs = " << result.curve.rows.size() << '\n'
        << "best_epoch = " << result.best_epoch << '\n'
        << "filter_cap_accepts = " << result.cap_accepts << '\n';
      if (result.filter_range) {
        f << "filter_low = " << format_double(result.filter_range->low) << '\n'
          << "filter_high = " << format_double(result.filter_range->high) << '\n';
      }
    });
    out << "wrote " << (dir / "checkpoints" / "final.rlm").string() << '\n';
    return kExitOk;
  } catch (const std::exception&) {
    err << "train failed while " << stage << '\n';
    throw;
  }
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  TraceArgs trace;
  std::vector<std::string> schedulers{"fcfs", "sjf", "wfp3", "unicep", "f1"};
  std::string goal = "bsld";
  std::string backfilling = "on";
  std::size_t length = 1024;
  std::size_t repetitions = 10;
  long long seed = 0;
  std::string out_dir;
  int max_obsv_size = kDefaultMaxObsvSize;
};

void add_evaluate_options(Command& cmd, EvaluateArgs& a) {
  a.trace.add_options(cmd, true);
  cmd.add("schedulers", a.schedulers, "heuristic names and/or checkpoint paths", "evaluate");
  cmd.add("goal", a.goal, "metric reported in the table", "evaluate");
  cmd.add("backfilling", a.backfilling, "on, off or both", "evaluate")
      ->check(CLI::IsMember({"on", "off", "both"}));
  cmd.add("length", a.length, "jobs per evaluation sequence", "evaluate");
  cmd.add("repetitions", a.repetitions, "shared sequences per trace", "evaluate");
  cmd.add("seed", a.seed, "sequence sampling seed", "evaluate");
  cmd.add("max_obsv_size", a.max_obsv_size, "observation rows of the checkpoints", "evaluate");
  cmd.add("out", a.out_dir, "output directory (table to stdout when empty)", "evaluate");
}

int cmd_evaluate(const Command& cmd, const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (a.schedulers.empty()) throw ConfigError("no schedulers given");
  const auto traces = a.trace.load();
  std::vector<SchedulerFactory> factories;
  for (const auto& s : a.schedulers) factories.push_back(make_scheduler_factory(s, a.max_obsv_size));

  std::vector<bool> modes;
  if (a.backfilling != "off") modes.push_back(true);
  if (a.backfilling != "on") modes.push_back(false);

  EvaluationSpec spec;
  spec.goal = parse_goal(a.goal);
  spec.sequence_length = a.length;
  spec.repetitions = a.repetitions;
  spec.seed = static_cast<std::uint64_t>(a.seed);

  auto table = evaluation_table(factories);
  CsvTable details;
  for (const auto& trace : traces) {
    if (a.length > trace.jobs.size()) {
      throw InsufficientJobs("sequence length " + std::to_string(a.length) + " exceeds the " +
                             std::to_string(trace.jobs.size()) + " jobs of " + trace.source_name);
    }
    for (bool backfilling : modes) {
      spec.backfilling = backfilling;
      const auto result = evaluate_schedulers(trace, factories, spec);
      for (std::size_t rep = 0; rep < result.sequence_hashes.size(); ++rep) {
        err << "sequence trace=" << trace.source_name << " backfilling=" << backfilling
            << " rep=" << rep << " hash=" << hex(result.sequence_hashes[rep])
            << " schedulers=" << factories.size() << '\n';
      }
      append_evaluation_row(table, trace.source_name, backfilling, result);
      auto d = evaluation_details(trace.source_name, backfilling, result, spec.goal);
      if (details.header.empty()) details.header = d.header;
      details.rows.insert(details.rows.end(), d.rows.begin(), d.rows.end());
    }
  }

  if (a.out_dir.empty()) {
    write_csv_table(out, table);
    return kExitOk;
  }
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto effective = cmd.effective();
  write_text(dir / "config.ini", [&](std::ostream& f) { effective.write(f); });
  write_text(dir / "table.csv", [&](std::ostream& f) { write_csv_table(f, table); });
  write_text(dir / "details.csv", [&](std::ostream& f) { write_csv_table(f, details); });
  write_text(dir / "manifest.txt", [&](std::ostream& f) {
    f << "command = evaluate\n"
      << "goal = " << goal_name(spec.goal) << '\n'
      << "traces = ";
    for (std::size_t i = 0; i < traces.size(); ++i) f << (i ? "," : "") << traces[i].source_name;
    f << "\nconfig_hash = " << hex(effective.hash()) << '\n';
  });
  write_csv_table(out, table);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string path;
  std::size_t max_jobs = 0;
  int cluster_size = 0;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  ParseOptions opts;
  if (a.max_jobs > 0) opts.max_jobs = a.max_jobs;
  if (a.cluster_size > 0) opts.cluster_size = a.cluster_size;
  opts.source_name = fs::path(a.path).stem().string();
  const auto trace = load_swf(a.path, opts);
  const auto s = trace_stats(trace);
  CsvTable table;
  table.header = {"size", "i_t", "r_t", "n_t", "jobs", "dropped"};
  table.rows.push_back({std::to_string(trace.cluster_size), format_double(s.avg_arrival_interval),
                        format_double(s.avg_requested_runtime),
                        format_double(s.avg_requested_processors), std::to_string(s.job_count),
                        std::to_string(trace.dropped)});
  write_csv_table(out, table);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint;
  std::size_t trials = 10000;
  long long seed = 0;
  int queue_size = kDefaultMaxObsvSize;
};

struct LatencySummary {
  double mean_us = 0.0, p50_us = 0.0, p99_us = 0.0;
};

LatencySummary summarize(std::vector<double> us) {
  std::sort(us.begin(), us.end());
  LatencySummary s;
  for (double v : us) s.mean_us += v / static_cast<double>(us.size());
  s.p50_us = us[us.size() / 2];
  s.p99_us = us[std::min(us.size() - 1, us.size() * 99 / 100)];
  return s;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.trials == 0) return kExitOk;
  PolicyNet net = a.checkpoint.empty() ? PolicyNet::make(static_cast<std::uint64_t>(a.seed))
                                       : load_checkpoint(a.checkpoint).policy;
  std::mt19937_64 rng(static_cast<std::uint64_t>(a.seed));
  const int cluster_size = 256;
  const Seconds time_cap = 86400;
  auto random_queue = [&] {
    std::vector<PendingJob> queue(static_cast<std::size_t>(a.queue_size));
    std::uniform_int_distribution<Seconds> wait(0, time_cap), req(1, time_cap);
    std::uniform_int_distribution<int> procs(1, cluster_size);
    for (std::size_t i = 0; i < queue.size(); ++i) {
      auto& p = queue[i];
      p.job.job_id = static_cast<std::int64_t>(i + 1);
      p.wait_so_far = wait(rng);
      p.job.submit_time = time_cap - p.wait_so_far;
      p.job.requested_time = req(rng);
      p.job.actual_runtime = p.job.requested_time;
      p.job.requested_processors = procs(rng);
    }
    return queue;
  };

  using clock = std::chrono::steady_clock;
  std::vector<double> dnn_us, sjf_us;
  std::uint64_t dnn_sum = 0, sjf_sum = 0;
  auto cluster = ClusterState::idle(cluster_size);
  cluster.start(0, time_cap * 2, cluster_size / 2);
  for (std::size_t t = 0; t < a.trials; ++t) {
    const auto queue = random_queue();
    const auto obs = build_observation(queue, cluster, time_cap, time_cap);
    auto t0 = clock::now();
    const int slot = policy_argmax(policy_forward(net, obs));
    auto t1 = clock::now();
    const auto pick = select(HeuristicKind::SJF, queue, time_cap);
    auto t2 = clock::now();
    dnn_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    sjf_us.push_back(std::chrono::duration<double, std::micro>(t2 - t1).count());
    dnn_sum = dnn_sum * 131 + static_cast<std::uint64_t>(slot);
    sjf_sum = sjf_sum * 131 + pick;
  }

  CsvTable table;
  table.header = {"method", "trials", "queue", "mean_us", "p50_us", "p99_us", "decision_checksum"};
  auto add = [&](const std::string& name, const std::vector<double>& us, std::uint64_t sum) {
    const auto s = summarize(us);
    table.rows.push_back({name, std::to_string(a.trials), std::to_string(a.queue_size),
                          format_double(s.mean_us), format_double(s.p50_us), format_double(s.p99_us),
                          hex(sum)});
  };
  add("policy_argmax", dnn_us, dnn_sum);
  add("sjf_select", sjf_us, sjf_sum);
  write_csv_table(out, table);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  TraceArgs trace;
  std::string out_path;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  auto trace = generate_synthetic(a.trace.synthetic_config, a.trace.trace_seed);
  trace.source_name = "synthetic";
  std::ofstream f(a.out_path);
  if (!f) throw ConfigError("cannot write " + a.out_path);
  write_swf(f, trace);
  const auto s = trace_stats(trace);
  out << "wrote " << trace.jobs.size() << " jobs to " << a.out_path << " (i_t="
      << format_double(s.avg_arrival_interval) << " r_t=" << format_double(s.avg_requested_runtime)
      << " n_t=" << format_double(s.avg_requested_processors) << ")\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"HPC batch-job scheduling with learned kernel policies"};
  app.require_subcommand(1);

  TrainArgs train_args;
  Command train_cmd(app, "train", "train a policy with PPO");
  add_train_options(train_cmd, train_args);

  EvaluateArgs eval_args;
  Command eval_cmd(app, "evaluate", "compare schedulers on shared random sequences");
  add_evaluate_options(eval_cmd, eval_args);

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "print size, i_t, r_t, n_t of an SWF trace");
  stats->add_option("trace", stats_args.path, "SWF trace path")->required();
  stats->add_option("--max-jobs", stats_args.max_jobs, "keep only the first N jobs (0: all)");
  stats->add_option("--cluster-size", stats_args.cluster_size, "override MaxProcs (0: header)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "time one scheduling decision");
  bench->add_option("--checkpoint", bench_args.checkpoint, "model file (default: fresh network)");
  bench->add_option("--trials", bench_args.trials, "decisions to time")->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "seed of the random observations");
  bench->add_option("--queue", bench_args.queue_size, "jobs per observation")->capture_default_str();

  GenArgs gen_args;
  Command gen_cmd(app, "gen", "write a synthetic SWF trace");
  gen_args.trace.add_synthetic_options(gen_cmd);
  gen_cmd.app()->add_option("-o,--out", gen_args.out_path, "output SWF path")->required();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitInput;
    }
    if (train_cmd.parsed()) {
      train_cmd.apply_config();
      return cmd_train(train_cmd, train_args, out, err);
    }
    if (eval_cmd.parsed()) {
      eval_cmd.apply_config();
      return cmd_evaluate(eval_cmd, eval_args, out, err);
    }
    if (stats->parsed()) return cmd_stats(stats_args, out);
    if (bench->parsed()) return cmd_bench(bench_args, out);
    if (gen_cmd.parsed()) {
      gen_cmd.apply_config();
      return cmd_gen(gen_args, out);
    }
    return kExitInput;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kExitModel;
  } catch (const TrainingDiverged& e) {
    err << "training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace rlsched::cli
