#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asgbdt/dataset.hpp"
#include "asgbdt/loss.hpp"
#include "asgbdt/sampler.hpp"
#include "asgbdt/tree.hpp"

namespace asgbdt {

/// Additive model F(x) = f0 + sum_k step_k * tree_k(x). Trees are stored in
/// server receive order.
struct Forest {
  struct Entry {
    RegressionTree tree;
    double step = 0.0;
  };

  double f0 = 0.0;
  std::vector<Entry> entries;
  std::uint32_t n_features = 0;
  std::uint64_t dataset_fingerprint = 0;

  double predict(const SparseRow& row) const;
  ScoreVector score_vector(const SparseDataset& ds) const;
};

/// f0 = frequency-weighted mean label, no trees.
Forest init_forest(const SparseDataset& ds);

enum class TrainMode {
  virtual_scheduler,  // single-threaded deterministic simulation
  real_threads,
};

struct TrainConfig {
  std::uint64_t n_trees = 100;
  double step = 0.1;
  SamplingPlan plan = SamplingPlan::uniform(1.0);
  TreeParams tree;
  std::uint32_t max_bins = FeatureBins::kDefaultMaxBins;

  std::uint32_t n_workers = 1;
  TrainMode mode = TrainMode::virtual_scheduler;
  /// Staleness cap: 0 picks the default 2 * n_workers, negative disables it.
  std::int64_t max_staleness = 0;

  std::uint64_t draw_seed = 1;
  std::uint64_t schedule_seed = 1;

  // Virtual-scheduler clock model.
  double sim_build_time = 10.0;   // per-tree worker build duration
  double sim_target_time = 1.0;   // server receive + redraw + publish duration
  double sim_build_jitter = 0.0;  // relative spread of build durations, [0, 1)

  std::int64_t staleness_bound() const {
    return max_staleness == 0 ? 2 * static_cast<std::int64_t>(n_workers) : max_staleness;
  }
};

/// One row per server update.
struct HistoryRow {
  std::uint64_t update = 0;  // 1-based, strictly increasing, no gaps
  std::uint32_t worker = 0;
  std::int64_t staleness = 0;  // updates applied between this tree's pull and push
  double train_loss = 0.0;     // mean loss per raw training row
  double test_loss = 0.0;      // NaN when no test set was given
  double accuracy = 0.0;       // on the test set when present, else training
  double wall_ms = 0.0;        // virtual time in virtual mode
};

struct History {
  std::vector<HistoryRow> rows;

  static constexpr const char* kCsvHeader = "update,worker,staleness,train_loss,test_loss,accuracy,wall_ms";
  void write_csv(std::ostream& out) const;
  std::int64_t max_staleness() const;
  /// First update whose train loss is <= threshold, or nullopt.
  std::optional<std::uint64_t> updates_to_threshold(double threshold) const;
};

struct TrainResult {
  Forest forest;
  History history;
};

/// One tree at a time: pull target, fit, apply, republish. Staleness is 0
/// throughout. With a unit sampling rate the target is the full gradient.
TrainResult train_serial(const SparseDataset& train, const TrainConfig& cfg,
                         const SparseDataset* test = nullptr);

/// Parameter-server loop: workers pull the latest published target snapshot,
/// fit a tree, push; the server applies pushes one at a time, redraws, and
/// republishes. Virtual mode replays bit-identically from the schedule seed;
/// real mode runs actual threads and enforces the staleness cap at pull time.
TrainResult train_async(const SparseDataset& train, const TrainConfig& cfg,
                        const SparseDataset* test = nullptr);

struct Metrics {
  double loss = 0.0;      // mean loss per raw row
  double accuracy = 0.0;  // score > 0 predicts label 1
  double auc = 0.0;       // frequency-weighted rank statistic
};

Metrics evaluate(const Forest& forest, const SparseDataset& ds);
Metrics evaluate_scores(const SparseDataset& ds, const ScoreVector& scores);

// Forest file: manifest (f0, per-tree steps, seeds, model config) plus the
// tree text blocks. Bit-stable for a given model regardless of execution
// mode, so degenerate schedules serialize identically.
void serialize_forest(const Forest& forest, const TrainConfig& cfg, std::ostream& out);
Forest parse_forest(std::istream& in);
Forest parse_forest_file(const std::string& path);

}  // namespace asgbdt
