// asgbdt command-line front end: train/eval GBDT forests, inspect sampling
// diversity, evaluate the convergence calculators, and run experiment sweeps.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "asgbdt/dataset.hpp"
#include "asgbdt/rng.hpp"
#include "asgbdt/sampler.hpp"
#include "asgbdt/synthetic.hpp"
#include "asgbdt/theory.hpp"
#include "asgbdt/trainer.hpp"

namespace fs = std::filesystem;
using namespace asgbdt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string default_out_dir() {
  const char* env = std::getenv("ASGBDT_OUT_DIR");
  return env && *env ? env : ".";
}

SparseDataset load_dataset(const std::string& path) {
  return deduplicate(parse_libsvm_file(path));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

struct TrainCli {
  std::string data;
  std::string test_data;
  double test_fraction = 0.0;
  std::string out_dir = default_out_dir();
  std::string mode = "virtual";
  std::uint64_t split_seed = 1;
  TrainConfig cfg;
  double rate = 1.0;

  void add_options(CLI::App* cmd, bool data_required = true) {
    auto* opt = cmd->add_option("--data", data, "Training dataset (LIBSVM text)");
    if (data_required) opt->required();
    cmd->add_option("--test-data", test_data, "Held-out dataset (LIBSVM text)");
    cmd->add_option("--test-fraction", test_fraction,
                    "Split off this fraction of raw rows as the test set")
        ->check(CLI::Range(0.0, 0.999));
    cmd->add_option("--split-seed", split_seed, "Seed for --test-fraction");
    cmd->add_option("--out", out_dir, "Output directory (default $ASGBDT_OUT_DIR or .)");
    cmd->add_option("--trees", cfg.n_trees, "Number of trees to train");
    cmd->add_option("--step", cfg.step, "Step length applied to every tree");
    cmd->add_option("--rate", rate, "Uniform sampling rate in (0, 1]")
        ->check(CLI::Range(1e-9, 1.0));
    cmd->add_option("--workers", cfg.n_workers, "Worker count");
    cmd->add_option("--mode", mode, "Concurrency mode")
        ->check(CLI::IsMember({"virtual", "real"}));
    cmd->add_option("--max-staleness", cfg.max_staleness,
                    "Staleness cap (0 = 2x workers, negative = unbounded)");
    cmd->add_option("--draw-seed", cfg.draw_seed, "Sampling seed");
    cmd->add_option("--schedule-seed", cfg.schedule_seed, "Virtual schedule seed");
    cmd->add_option("--feature-seed", cfg.tree.feature_seed, "Feature subsampling seed");
    cmd->add_option("--max-leaves", cfg.tree.max_leaves, "Leaves per tree");
    cmd->add_option("--min-weight-leaf", cfg.tree.min_weight_leaf,
                    "Minimum frequency-weighted samples per leaf");
    cmd->add_option("--feature-fraction", cfg.tree.feature_fraction,
                    "Fraction of features each tree may use")
        ->check(CLI::Range(1e-9, 1.0));
    cmd->add_option("--max-bins", cfg.max_bins, "Histogram bins per feature");
    cmd->add_option("--sim-build-time", cfg.sim_build_time, "Virtual build duration per tree");
    cmd->add_option("--sim-target-time", cfg.sim_target_time,
                    "Virtual server duration per receive");
    cmd->add_option("--sim-build-jitter", cfg.sim_build_jitter,
                    "Relative spread of virtual build durations")
        ->check(CLI::Range(0.0, 0.99));
  }

  TrainConfig resolved_config() const {
    TrainConfig c = cfg;
    c.plan = SamplingPlan::uniform(rate);
    c.mode = mode == "real" ? TrainMode::real_threads : TrainMode::virtual_scheduler;
    return c;
  }

  // Returns (train, optional test).
  std::pair<SparseDataset, std::optional<SparseDataset>> load() const {
    SparseDataset train = load_dataset(data);
    std::optional<SparseDataset> test;
    if (!test_data.empty()) {
      test = load_dataset(test_data);
    } else if (test_fraction > 0.0) {
      auto [tr, te] = split_train_test(train, test_fraction, split_seed);
      train = std::move(tr);
      test = std::move(te);
    }
    return {std::move(train), std::move(test)};
  }
};

TrainResult run_training(const SparseDataset& train, const TrainConfig& cfg,
                         const SparseDataset* test) {
  if (cfg.n_workers == 1 && cfg.mode == TrainMode::virtual_scheduler)
    return train_serial(train, cfg, test);
  return train_async(train, cfg, test);
}

int cmd_train(const TrainCli& cli, const CLI::App& app) {
  auto [train, test] = cli.load();
  TrainConfig cfg = cli.resolved_config();
  TrainResult result = run_training(train, cfg, test ? &*test : nullptr);

  fs::create_directories(cli.out_dir);
  {
    std::ofstream out(fs::path(cli.out_dir) / "forest.txt");
    serialize_forest(result.forest, cfg, out);
  }
  {
    std::ofstream out(fs::path(cli.out_dir) / "history.csv");
    result.history.write_csv(out);
  }
  write_file(fs::path(cli.out_dir) / "config_echo.ini", app.config_to_str(true, true));

  Metrics m = evaluate(result.forest, train);
  std::cout << "trees=" << result.forest.entries.size() << "\n";
  std::cout << "train_loss=" << g17(m.loss) << "\n";
  if (test) {
    Metrics mt = evaluate(result.forest, *test);
    std::cout << "test_loss=" << g17(mt.loss) << "\n";
    std::cout << "test_accuracy=" << g17(mt.accuracy) << "\n";
  }
  std::cout << "max_staleness_observed=" << result.history.max_staleness() << "\n";
  std::cout << "forest=" << (fs::path(cli.out_dir) / "forest.txt").string() << "\n";
  std::cout << "history=" << (fs::path(cli.out_dir) / "history.csv").string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& forest_path, const std::string& data_path) {
  Forest forest = parse_forest_file(forest_path);
  SparseDataset ds = load_dataset(data_path);
  if (ds.n_features() > forest.n_features)
    throw std::invalid_argument("dataset has " + std::to_string(ds.n_features()) +
                                " features but the forest was trained on " +
                                std::to_string(forest.n_features));
  Metrics m = evaluate(forest, ds);
  std::cout << "loss=" << g17(m.loss) << "\n";
  std::cout << "accuracy=" << g17(m.accuracy) << "\n";
  std::cout << "auc=" << g17(m.auc) << "\n";
  return kExitOk;
}

int cmd_stats(const std::string& data_path, double rate, std::uint64_t trials, std::uint64_t seed,
              const std::string& csv_path) {
  SparseDataset ds = load_dataset(data_path);
  DiversityStats stats = estimate_diversity(SamplingPlan::uniform(rate), ds, trials, seed);
  std::cout << ds.stats_report();
  std::cout << "omega=" << stats.omega << "\n";
  std::cout << "delta=" << g17(stats.delta) << "\n";
  std::cout << "rho=" << g17(stats.rho) << "\n";
  std::cout << "mean_support=" << g17(stats.mean_support) << "\n";
  std::cout << "trials=" << stats.trials << "\n";
  if (!csv_path.empty()) {
    std::ostringstream out;
    out << "n_samples,omega,delta,rho,mean_support,trials\n";
    out << ds.n_samples() << "," << stats.omega << "," << g17(stats.delta) << ","
        << g17(stats.rho) << "," << g17(stats.mean_support) << "," << stats.trials << "\n";
    write_file(csv_path, out.str());
  }
  return kExitOk;
}

struct TheoryCli {
  TheoryConstants k;
  double epsilon = 0.1;
  double theta = 0.5;
  double d0 = 1.0;
  double log_numerator = -1.0;
  double step_override = 0.0;
  double t_build = 0.0;
  double t_target = 0.0;
  std::string estimate_data;
  std::string estimate_forest;
  double estimate_rate = 0.5;
  std::uint64_t estimate_trials = 16;
  std::uint64_t seed = 1;
  std::string sweep_tau;  // "min:max[:step]"
  std::string sweep_rate; // comma-separated rates (needs --estimate-data)
  std::string csv_path;
  bool c_explicit = false;
  bool lip_explicit = false;
  double rho_projected = -1.0;  // filled by an estimate run
};

std::vector<double> parse_rate_list(const std::string& text) {
  std::vector<double> rates;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) rates.push_back(std::stod(tok));
  return rates;
}

void apply_estimate(TheoryCli& cli) {
  SparseDataset ds = load_dataset(cli.estimate_data);
  FeatureBins bins(ds);
  Forest forest =
      cli.estimate_forest.empty() ? init_forest(ds) : parse_forest_file(cli.estimate_forest);
  TreeParams params;
  EstimateOptions opts;
  opts.trials = cli.estimate_trials;
  opts.seed = cli.seed;
  opts.c = cli.k.c;
  opts.lipschitz = cli.k.lipschitz;
  double tau = cli.k.tau;
  SamplingPlan plan = SamplingPlan::uniform(cli.estimate_rate);
  cli.k = estimate_constants(ds, bins, plan, forest, params, opts);
  cli.k.tau = tau;
  cli.rho_projected = estimate_projected_rho(ds, bins, plan, forest, params,
                                             std::max<std::uint64_t>(cli.estimate_trials, 2),
                                             opts.seed);
}

int cmd_theory(TheoryCli cli) {
  if (!cli.estimate_data.empty()) apply_estimate(cli);

  StepPlan plan = plan_steps(cli.k, cli.epsilon, cli.theta, cli.d0, cli.log_numerator);
  const double v = cli.step_override > 0.0 ? cli.step_override : plan.step;
  const std::uint64_t t = plan.updates;
  ContractionReport rep = contraction(cli.k, v);

  if (!cli.c_explicit || !cli.lip_explicit)
    std::cout << "warning=c/lipschitz left at defaults; they are model assumptions, supply "
                 "dataset-specific values for calibrated output\n";
  std::cout << "note=the step and iteration-bound formulas carry different delay tail "
               "coefficients (4 vs 6 with a log factor); both are reported as defined\n";
  std::cout << "v=" << g17(v) << "\n";
  std::cout << "t=" << t << "\n";
  std::cout << "c1=" << g17(rep.c1) << "\n";
  std::cout << "c2=" << g17(rep.c2) << "\n";
  std::cout << "r=" << g17(rep.rate) << "\n";
  std::cout << "diameter=" << g17(rep.diameter) << "\n";
  std::cout << "usable=" << (rep.usable ? 1 : 0) << "\n";
  std::cout << "omega=" << g17(cli.k.omega) << "\n";
  std::cout << "delta=" << g17(cli.k.delta_cap) << "\n";
  std::cout << "rho=" << g17(cli.k.rho) << "\n";
  std::cout << "zeta=" << g17(cli.k.zeta) << "\n";
  std::cout << "m=" << g17(cli.k.grad_bound) << "\n";
  if (cli.rho_projected >= 0.0)
    std::cout << "rho_projected=" << g17(cli.rho_projected) << "\n";
  if (cli.t_target > 0.0)
    std::cout << "worker_bound=" << g17(max_workers(cli.t_build, cli.t_target)) << "\n";

  if (!cli.sweep_tau.empty()) {
    double lo = 0, hi = 0, step = 1;
    char colon1 = 0, colon2 = 0;
    std::istringstream ss(cli.sweep_tau);
    ss >> lo >> colon1 >> hi;
    if (ss >> colon2 >> step) {
    }
    if (colon1 != ':' || hi < lo || step <= 0) throw std::invalid_argument("bad --sweep-tau range");
    std::ostringstream out;
    out << "tau,v,t,c1,c2,r,diameter\n";
    for (double tau = lo; tau <= hi + 1e-12; tau += step) {
      TheoryConstants k = cli.k;
      k.tau = tau;
      double vv = cli.step_override > 0.0 ? cli.step_override
                                          : step_length(k, cli.epsilon, cli.theta);
      ContractionReport r = contraction(k, vv);
      out << g17(tau) << "," << g17(vv) << ","
          << iteration_bound(k, cli.epsilon, cli.theta, cli.d0, cli.log_numerator) << ","
          << g17(r.c1) << "," << g17(r.c2) << "," << g17(r.rate) << "," << g17(r.diameter) << "\n";
    }
    if (cli.csv_path.empty()) throw std::invalid_argument("--sweep-tau needs --csv");
    write_file(cli.csv_path, out.str());
    std::cout << "sweep_csv=" << cli.csv_path << "\n";
  }

  if (!cli.sweep_rate.empty()) {
    if (cli.estimate_data.empty())
      throw std::invalid_argument("--sweep-rate needs --estimate-data");
    if (cli.csv_path.empty()) throw std::invalid_argument("--sweep-rate needs --csv");
    SparseDataset ds = load_dataset(cli.estimate_data);
    std::ostringstream out;
    out << "rate,omega,delta,rho,v,t,r,diameter\n";
    for (double rate : parse_rate_list(cli.sweep_rate)) {
      DiversityStats div = estimate_diversity(SamplingPlan::uniform(rate), ds,
                                              std::max<std::uint64_t>(cli.estimate_trials, 2),
                                              hash_key(cli.seed, 0xd1));
      TheoryConstants k = cli.k;
      k.omega = static_cast<double>(div.omega);
      k.delta_cap = div.delta;
      k.rho = div.rho;
      double vv = cli.step_override > 0.0 ? cli.step_override
                                          : step_length(k, cli.epsilon, cli.theta);
      ContractionReport r = contraction(k, vv);
      out << g17(rate) << "," << div.omega << "," << g17(div.delta) << "," << g17(div.rho) << ","
          << g17(vv) << "," << iteration_bound(k, cli.epsilon, cli.theta, cli.d0, cli.log_numerator)
          << "," << g17(r.rate) << "," << g17(r.diameter) << "\n";
    }
    write_file(cli.csv_path, out.str());
    std::cout << "sweep_csv=" << cli.csv_path << "\n";
  }
  return kExitOk;
}

struct SweepCli {
  TrainCli train;
  std::string axis = "workers";
  std::string values;
  double threshold = 0.0;
};

int cmd_sweep(const SweepCli& cli, const CLI::App& app) {
  auto [train, test] = cli.train.load();
  fs::create_directories(cli.train.out_dir);

  std::vector<double> values = parse_rate_list(cli.values);
  if (values.empty()) throw std::invalid_argument("--values must list at least one cell");

  std::ostringstream summary;
  summary << "value,updates_to_threshold,final_loss,saturated\n";
  for (double value : values) {
    TrainConfig cfg = cli.train.resolved_config();
    std::string tag;
    if (cli.axis == "workers") {
      cfg.n_workers = static_cast<std::uint32_t>(value);
      if (cfg.n_workers < 1) throw std::invalid_argument("worker cells must be >= 1");
      tag = "workers_" + std::to_string(cfg.n_workers);
    } else {
      cfg.plan = SamplingPlan::uniform(value);
      tag = "rate_" + g17(value);
    }
    TrainResult result = run_training(train, cfg, test ? &*test : nullptr);
    {
      std::ofstream out(fs::path(cli.train.out_dir) / ("history_" + tag + ".csv"));
      result.history.write_csv(out);
    }
    auto hit = result.history.updates_to_threshold(cli.threshold);
    double final_loss =
        result.history.rows.empty() ? 0.0 : result.history.rows.back().train_loss;
    summary << g17(value) << "," << (hit ? static_cast<std::int64_t>(*hit) : -1) << ","
            << g17(final_loss) << "," << (hit ? 0 : 1) << "\n";
  }
  write_file(fs::path(cli.train.out_dir) / "summary.csv", summary.str());
  write_file(fs::path(cli.train.out_dir) / "config_echo.ini", app.config_to_str(true, true));
  std::cout << summary.str();
  return kExitOk;
}

struct GenCli {
  std::string kind = "highdiv";
  std::string out;
  std::size_t n = 2000;
  std::uint32_t features = 200;
  std::uint64_t seed = 1;
  std::vector<std::int64_t> freqs{10000, 20000, 30000};
};

int cmd_gen(const GenCli& cli) {
  SparseDataset ds;
  if (cli.kind == "lowdiv") {
    if (cli.freqs.size() != 3) throw std::invalid_argument("--freqs needs exactly three values");
    ds = make_lowdiv({cli.freqs[0], cli.freqs[1], cli.freqs[2]});
  } else {
    ds = make_highdiv(cli.n, cli.features, cli.seed);
  }
  std::ofstream out(cli.out);
  if (!out) throw std::runtime_error("cannot write " + cli.out);
  write_libsvm(ds, out);
  std::cout << ds.stats_report();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous stochastic gradient boosting trainer"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();  // config echoes carry real values
  app.set_config("--config", "", "Read options from a key=value config file");

  TrainCli train_cli;
  auto* train_cmd = app.add_subcommand("train", "Train a forest and write artifacts");
  train_cli.add_options(train_cmd);

  std::string eval_forest, eval_data;
  auto* eval_cmd = app.add_subcommand("eval", "Score a dataset with a saved forest");
  eval_cmd->add_option("--forest", eval_forest, "Forest file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset (LIBSVM text)")->required();

  std::string stats_data, stats_csv;
  double stats_rate = 1.0;
  std::uint64_t stats_trials = 1000, stats_seed = 1;
  auto* stats_cmd = app.add_subcommand("stats", "Sampling diversity report");
  stats_cmd->add_option("--data", stats_data, "Dataset (LIBSVM text)")->required();
  stats_cmd->add_option("--rate", stats_rate, "Uniform sampling rate")
      ->check(CLI::Range(1e-9, 1.0));
  stats_cmd->add_option("--trials", stats_trials, "Monte Carlo draws")->check(CLI::Range(2, 100000000));
  stats_cmd->add_option("--seed", stats_seed, "Sampling seed");
  stats_cmd->add_option("--csv", stats_csv, "Also write the report as CSV");

  TheoryCli theory_cli;
  auto* theory_cmd = app.add_subcommand("theory", "Convergence constants report");
  auto* copt = theory_cmd->add_option("--c", theory_cli.k.c, "Strong-convexity modulus");
  auto* lopt = theory_cmd->add_option("--lipschitz", theory_cli.k.lipschitz, "Lipschitz constant");
  theory_cmd->add_option("--grad-bound", theory_cli.k.grad_bound, "Update norm bound M");
  theory_cmd->add_option("--omega", theory_cli.k.omega, "Max distinct samples per draw");
  theory_cmd->add_option("--delta", theory_cli.k.delta_cap, "Max inclusion probability");
  theory_cmd->add_option("--rho", theory_cli.k.rho, "Draw intersection probability");
  theory_cmd->add_option("--zeta", theory_cli.k.zeta, "Tree tortuosity");
  theory_cmd->add_option("--tau", theory_cli.k.tau, "Staleness bound");
  theory_cmd->add_option("--delta-leaf", theory_cli.k.delta_leaf, "Max intra-leaf distance");
  theory_cmd->add_option("--m-max", theory_cli.k.m_max, "Max sample frequency");
  theory_cmd->add_option("--epsilon", theory_cli.epsilon, "Target suboptimality");
  theory_cmd->add_option("--theta", theory_cli.theta, "Slack factor in (0, 1)");
  theory_cmd->add_option("--d0", theory_cli.d0, "Initial squared distance to the optimum");
  theory_cmd->add_option("--log-numerator", theory_cli.log_numerator,
                         "Numerator constant inside the iteration bound's log "
                         "(defaults to the Lipschitz constant)");
  theory_cmd->add_option("--step", theory_cli.step_override,
                         "Use this step length instead of the computed one");
  theory_cmd->add_option("--t-build", theory_cli.t_build, "Measured tree build time");
  theory_cmd->add_option("--t-target", theory_cli.t_target,
                         "Measured communicate+target time (enables worker_bound)");
  theory_cmd->add_option("--estimate-data", theory_cli.estimate_data,
                         "Estimate omega/delta/rho/zeta/delta-leaf/M from this dataset");
  theory_cmd->add_option("--estimate-forest", theory_cli.estimate_forest,
                         "Forest whose scores anchor the estimate (default: init forest)");
  theory_cmd->add_option("--rate", theory_cli.estimate_rate, "Sampling rate for the estimate")
      ->check(CLI::Range(1e-9, 1.0));
  theory_cmd->add_option("--trials", theory_cli.estimate_trials, "Estimate trials");
  theory_cmd->add_option("--seed", theory_cli.seed, "Estimate seed");
  theory_cmd->add_option("--sweep-tau", theory_cli.sweep_tau, "CSV sweep range min:max[:step]");
  theory_cmd->add_option("--sweep-rate", theory_cli.sweep_rate,
                         "CSV sweep over comma-separated rates (needs --estimate-data)");
  theory_cmd->add_option("--csv", theory_cli.csv_path, "Sweep output CSV path");

  SweepCli sweep_cli;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid of training runs with a summary CSV");
  sweep_cli.train.add_options(sweep_cmd);
  sweep_cmd->add_option("--axis", sweep_cli.axis, "Grid axis")
      ->check(CLI::IsMember({"workers", "rate"}));
  sweep_cmd->add_option("--values", sweep_cli.values, "Comma-separated cell values")->required();
  sweep_cmd->add_option("--threshold", sweep_cli.threshold, "Train-loss threshold")->required();

  GenCli gen_cli;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a bundled synthetic dataset");
  gen_cmd->add_option("--kind", gen_cli.kind, "Generator")
      ->check(CLI::IsMember({"lowdiv", "highdiv"}));
  gen_cmd->add_option("--out", gen_cli.out, "Output path (LIBSVM text)")->required();
  gen_cmd->add_option("--n", gen_cli.n, "Distinct rows (highdiv)");
  gen_cmd->add_option("--features", gen_cli.features, "Feature dimensions (highdiv)");
  gen_cmd->add_option("--seed", gen_cli.seed, "Generator seed (highdiv)");
  gen_cmd->add_option("--freqs", gen_cli.freqs, "Three sample frequencies (lowdiv)")
      ->expected(3);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_cli, app);
    if (*eval_cmd) return cmd_eval(eval_forest, eval_data);
    if (*stats_cmd) return cmd_stats(stats_data, stats_rate, stats_trials, stats_seed, stats_csv);
    if (*theory_cmd) {
      theory_cli.c_explicit = copt->count() > 0;
      theory_cli.lip_explicit = lopt->count() > 0;
      return cmd_theory(theory_cli);
    }
    if (*sweep_cmd) return cmd_sweep(sweep_cli, app);
    if (*gen_cmd) return cmd_gen(gen_cli);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
