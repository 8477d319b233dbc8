#include "asgbdt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <queue>
#include <thread>

#include "asgbdt/rng.hpp"

namespace asgbdt {

double Forest::predict(const SparseRow& row) const {
  double f = f0;
  for (const Entry& e : entries) f += e.step * e.tree.predict(row);
  return f;
}

ScoreVector Forest::score_vector(const SparseDataset& ds) const {
  ScoreVector scores(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i) scores[i] = predict(ds.sample(i));
  return scores;
}

Forest init_forest(const SparseDataset& ds) {
  if (ds.n_samples() == 0)
    throw std::invalid_argument("cannot initialize a forest on an empty dataset");
  double weight = 0.0, weighted_labels = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    weight += static_cast<double>(ds.frequency(i));
    weighted_labels += static_cast<double>(ds.frequency(i)) * ds.label(i);
  }
  Forest f;
  f.f0 = weighted_labels / weight;
  f.n_features = ds.n_features();
  f.dataset_fingerprint = ds.fingerprint();
  return f;
}

namespace {

double mean_loss(const SparseDataset& ds, const ScoreVector& scores) {
  return total_loss(ds, scores) / static_cast<double>(ds.n_raw());
}

double accuracy_of(const SparseDataset& ds, const ScoreVector& scores) {
  double correct = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    int predicted = scores[i] > 0.0 ? 1 : 0;
    if (predicted == ds.label(i)) correct += static_cast<double>(ds.frequency(i));
  }
  return correct / static_cast<double>(ds.n_raw());
}

/// Immutable target snapshot workers fit against. Pulls copy a shared
/// pointer; pushes swap in a fresh one, so pulls never block pushes.
struct PublishedTarget {
  GradientVector target;            // +gradient flavor
  std::vector<double> fit_weights;  // m' (or m for the full gradient)
  std::uint64_t version = 0;        // server updates applied when computed
};

RegressionTree build_tree_from(const PublishedTarget& snap, const SparseDataset& train,
                               const FeatureBins& bins, const TrainConfig& cfg) {
  DatasetView view = snap.target.included.empty()
                         ? DatasetView::all(train, bins)
                         : DatasetView::from_support(train, bins, snap.target.included);
  // Boosting descends the loss, so trees fit the negative gradient.
  GradientVector neg;
  neg.flavor = snap.target.flavor;
  neg.included = snap.target.included;
  neg.values.resize(snap.target.values.size());
  for (std::size_t i = 0; i < neg.values.size(); ++i) neg.values[i] = -snap.target.values[i];

  TreeParams params = cfg.tree;
  params.feature_seed = hash_key(cfg.tree.feature_seed, 0xf17, snap.version);
  RegressionTree tree = fit_tree(view, neg, snap.fit_weights, params);
  tree.draw_index = snap.version;
  return tree;
}

// Owns all mutable training state. Not internally synchronized: the serial
// and virtual drivers are single-threaded, and the real-thread driver
// serializes every call under its own mutex.
class Server {
 public:
  Server(const SparseDataset& train, const SparseDataset* test, const TrainConfig& cfg)
      : train_(train), test_(test), cfg_(cfg) {
    cfg.plan.validate(train);
    if (!(cfg.step > 0.0)) throw std::invalid_argument("step length must be positive");
    forest_ = init_forest(train);
    train_scores_.assign(train.n_samples(), forest_.f0);
    if (test_) test_scores_.assign(test_->n_samples(), forest_.f0);
    publish();
  }

  std::shared_ptr<const PublishedTarget> snapshot() const { return published_; }
  std::uint64_t version() const { return applied_; }

  /// Linearization point: append the tree, refresh scores, record history,
  /// redraw and republish. Exactly one call per received tree.
  void apply(RegressionTree tree, std::uint32_t worker, double wall_ms) {
    const std::uint64_t pulled = tree.draw_index;
    Forest::Entry entry{std::move(tree), cfg_.step};
    for (std::size_t i = 0; i < train_.n_samples(); ++i)
      train_scores_[i] += entry.step * entry.tree.predict(train_.sample(i));
    if (test_)
      for (std::size_t i = 0; i < test_->n_samples(); ++i)
        test_scores_[i] += entry.step * entry.tree.predict(test_->sample(i));
    forest_.entries.push_back(std::move(entry));
    ++applied_;

    HistoryRow row;
    row.update = applied_;
    row.worker = worker;
    row.staleness = static_cast<std::int64_t>(applied_ - 1 - pulled);
    row.train_loss = mean_loss(train_, train_scores_);
    if (test_) {
      row.test_loss = mean_loss(*test_, test_scores_);
      row.accuracy = accuracy_of(*test_, test_scores_);
    } else {
      row.test_loss = std::numeric_limits<double>::quiet_NaN();
      row.accuracy = accuracy_of(train_, train_scores_);
    }
    row.wall_ms = wall_ms;
    history_.rows.push_back(row);
    publish();
  }

  TrainResult take_result() { return {std::move(forest_), std::move(history_)}; }

 private:
  void publish() {
    auto pub = std::make_shared<PublishedTarget>();
    pub->version = applied_;
    if (cfg_.plan.is_uniform() && cfg_.plan.uniform_rate() == 1.0) {
      pub->target = gradient_vector(train_, train_scores_);
      pub->fit_weights.resize(train_.n_samples());
      for (std::size_t i = 0; i < train_.n_samples(); ++i)
        pub->fit_weights[i] = static_cast<double>(train_.frequency(i));
    } else {
      SampleDraw d = draw(cfg_.plan, train_, cfg_.draw_seed, applied_);
      pub->target = weighted_target(d, train_, train_scores_);
      pub->fit_weights = std::move(d.weights);
    }
    published_ = std::move(pub);
  }

  const SparseDataset& train_;
  const SparseDataset* test_;
  const TrainConfig& cfg_;
  Forest forest_;
  ScoreVector train_scores_;
  ScoreVector test_scores_;
  std::shared_ptr<const PublishedTarget> published_;
  std::uint64_t applied_ = 0;
  History history_;
};

double build_duration(const TrainConfig& cfg, std::uint32_t worker, std::uint64_t counter) {
  double d = cfg.sim_build_time;
  if (cfg.sim_build_jitter > 0.0) {
    double u = uniform01(cfg.schedule_seed, 0xb11d, worker, counter);
    d *= 1.0 + cfg.sim_build_jitter * (2.0 * u - 1.0);
  }
  return d;
}

TrainResult train_async_virtual(const SparseDataset& train, const TrainConfig& cfg,
                                const SparseDataset* test) {
  FeatureBins bins(train, cfg.max_bins);
  Server server(train, test, cfg);
  const std::uint32_t n_workers = cfg.n_workers;
  const std::int64_t bound = cfg.staleness_bound();

  struct Completion {
    double time;
    std::uint64_t seq;
    std::uint32_t worker;
    bool operator>(const Completion& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> completions;
  std::vector<std::shared_ptr<const PublishedTarget>> worker_snapshot(n_workers);
  std::vector<std::int64_t> pulled_version(n_workers, -1);
  std::vector<std::uint64_t> build_counter(n_workers, 0);
  std::deque<std::uint32_t> pull_queue;
  std::size_t inflight = 0;
  std::uint64_t seq = 0;
  double server_free = 0.0;

  auto admission_ok = [&]() {
    if (bound < 0) return true;
    std::int64_t min_pulled = static_cast<std::int64_t>(server.version());
    for (std::uint32_t w = 0; w < n_workers; ++w)
      if (pulled_version[w] >= 0) min_pulled = std::min(min_pulled, pulled_version[w]);
    std::int64_t lag = static_cast<std::int64_t>(server.version()) - min_pulled;
    return lag + static_cast<std::int64_t>(inflight) + 1 <= bound;
  };
  auto admit_pulls = [&](double now) {
    while (!pull_queue.empty() && admission_ok()) {
      std::uint32_t w = pull_queue.front();
      pull_queue.pop_front();
      worker_snapshot[w] = server.snapshot();
      pulled_version[w] = static_cast<std::int64_t>(server.version());
      ++inflight;
      completions.push({now + build_duration(cfg, w, build_counter[w]++), seq++, w});
    }
  };

  for (std::uint32_t w = 0; w < n_workers; ++w) pull_queue.push_back(w);
  admit_pulls(0.0);

  while (server.version() < cfg.n_trees && !completions.empty()) {
    Completion done = completions.top();
    completions.pop();
    // The push waits if the server is still busy with an earlier receive.
    double applied_at = std::max(done.time, server_free) + cfg.sim_target_time;
    server_free = applied_at;

    RegressionTree tree = build_tree_from(*worker_snapshot[done.worker], train, bins, cfg);
    worker_snapshot[done.worker].reset();
    pulled_version[done.worker] = -1;
    --inflight;
    server.apply(std::move(tree), done.worker, applied_at);

    if (server.version() >= cfg.n_trees) break;
    pull_queue.push_back(done.worker);
    admit_pulls(applied_at);
  }
  return server.take_result();
}

TrainResult train_async_real(const SparseDataset& train, const TrainConfig& cfg,
                             const SparseDataset* test) {
  FeatureBins bins(train, cfg.max_bins);
  Server server(train, test, cfg);
  const std::uint32_t n_workers = cfg.n_workers;
  const std::int64_t bound = cfg.staleness_bound();

  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::int64_t> pulled_version(n_workers, -1);
  std::size_t inflight = 0;
  std::uint32_t active = n_workers;
  bool stop = cfg.n_trees == 0;
  std::string first_error;
  const auto start = std::chrono::steady_clock::now();

  auto admission_ok = [&]() {
    if (bound < 0) return true;
    std::int64_t min_pulled = static_cast<std::int64_t>(server.version());
    for (std::uint32_t w = 0; w < n_workers; ++w)
      if (pulled_version[w] >= 0) min_pulled = std::min(min_pulled, pulled_version[w]);
    std::int64_t lag = static_cast<std::int64_t>(server.version()) - min_pulled;
    return lag + static_cast<std::int64_t>(inflight) + 1 <= bound;
  };

  auto worker_loop = [&](std::uint32_t w) {
    try {
      while (true) {
        std::shared_ptr<const PublishedTarget> snap;
        {
          std::unique_lock lk(mu);
          cv.wait(lk, [&] { return stop || admission_ok(); });
          if (stop) break;
          snap = server.snapshot();
          pulled_version[w] = static_cast<std::int64_t>(snap->version);
          ++inflight;
        }
        RegressionTree tree = build_tree_from(*snap, train, bins, cfg);
        {
          std::unique_lock lk(mu);
          --inflight;
          pulled_version[w] = -1;
          if (server.version() < cfg.n_trees) {
            double wall = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
            server.apply(std::move(tree), w, wall);
            if (server.version() >= cfg.n_trees) stop = true;
          }
          cv.notify_all();
        }
      }
    } catch (const std::exception& e) {
      std::unique_lock lk(mu);
      if (pulled_version[w] >= 0) {
        pulled_version[w] = -1;
        --inflight;
      }
      if (first_error.empty()) first_error = e.what();
      std::cerr << "worker " << w << " failed: " << e.what() << "\n";
      if (--active == 0) stop = true;
      cv.notify_all();
      return;
    }
    std::unique_lock lk(mu);
    --active;
    cv.notify_all();
  };

  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::uint32_t w = 0; w < n_workers; ++w) threads.emplace_back(worker_loop, w);
  for (auto& t : threads) t.join();

  if (server.version() < cfg.n_trees)
    throw std::runtime_error("training stopped early: all workers failed (" + first_error + ")");
  return server.take_result();
}

}  // namespace

TrainResult train_serial(const SparseDataset& train, const TrainConfig& cfg,
                         const SparseDataset* test) {
  FeatureBins bins(train, cfg.max_bins);
  Server server(train, test, cfg);
  for (std::uint64_t j = 0; j < cfg.n_trees; ++j) {
    auto snap = server.snapshot();
    RegressionTree tree = build_tree_from(*snap, train, bins, cfg);
    double wall = static_cast<double>(j + 1) * (cfg.sim_build_time + cfg.sim_target_time);
    server.apply(std::move(tree), 0, wall);
  }
  return server.take_result();
}

TrainResult train_async(const SparseDataset& train, const TrainConfig& cfg,
                        const SparseDataset* test) {
  if (cfg.n_workers < 1) throw std::invalid_argument("need at least one worker");
  if (cfg.staleness_bound() == 0)
    throw std::invalid_argument("bounded staleness requires max_staleness >= 1");
  return cfg.mode == TrainMode::virtual_scheduler ? train_async_virtual(train, cfg, test)
                                                  : train_async_real(train, cfg, test);
}

void History::write_csv(std::ostream& out) const {
  char buf[96];
  out << kCsvHeader << "\n";
  for (const HistoryRow& r : rows) {
    out << r.update << "," << r.worker << "," << r.staleness << ",";
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", r.train_loss, r.test_loss,
                  r.accuracy, r.wall_ms);
    out << buf << "\n";
  }
}

std::int64_t History::max_staleness() const {
  std::int64_t m = 0;
  for (const HistoryRow& r : rows) m = std::max(m, r.staleness);
  return m;
}

std::optional<std::uint64_t> History::updates_to_threshold(double threshold) const {
  for (const HistoryRow& r : rows)
    if (r.train_loss <= threshold) return r.update;
  return std::nullopt;
}

Metrics evaluate_scores(const SparseDataset& ds, const ScoreVector& scores) {
  Metrics m;
  m.loss = mean_loss(ds, scores);
  m.accuracy = accuracy_of(ds, scores);

  // Frequency-weighted rank AUC; tied scores count half.
  std::vector<std::uint32_t> order(ds.n_samples());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return scores[a] < scores[b]; });
  double w_pos = 0.0, w_neg = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    (ds.label(i) == 1 ? w_pos : w_neg) += static_cast<double>(ds.frequency(i));
  double cum_neg = 0.0, num = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double group_pos = 0.0, group_neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (ds.label(order[j]) == 1 ? group_pos : group_neg) +=
          static_cast<double>(ds.frequency(order[j]));
      ++j;
    }
    num += group_pos * (cum_neg + 0.5 * group_neg);
    cum_neg += group_neg;
    i = j;
  }
  m.auc = (w_pos > 0.0 && w_neg > 0.0) ? num / (w_pos * w_neg)
                                       : std::numeric_limits<double>::quiet_NaN();
  return m;
}

Metrics evaluate(const Forest& forest, const SparseDataset& ds) {
  return evaluate_scores(ds, forest.score_vector(ds));
}

void serialize_forest(const Forest& forest, const TrainConfig& cfg, std::ostream& out) {
  char buf[64];
  auto g17 = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "asgbdt-forest 1\n";
  out << "n_features " << forest.n_features << "\n";
  out << "dataset_fingerprint " << forest.dataset_fingerprint << "\n";
  out << "f0 " << g17(forest.f0) << "\n";
  out << "n_trees " << forest.entries.size() << "\n";
  out << "draw_seed " << cfg.draw_seed << "\n";
  out << "feature_seed " << cfg.tree.feature_seed << "\n";
  out << "sampling_rate "
      << (cfg.plan.is_uniform() ? g17(cfg.plan.uniform_rate()) : std::string("mixed")) << "\n";
  out << "max_bins " << cfg.max_bins << "\n";
  out << "max_leaves " << cfg.tree.max_leaves << "\n";
  out << "min_weight_leaf " << g17(cfg.tree.min_weight_leaf) << "\n";
  out << "feature_fraction " << g17(cfg.tree.feature_fraction) << "\n";
  for (std::size_t k = 0; k < forest.entries.size(); ++k) {
    out << "entry " << k << " step " << g17(forest.entries[k].step) << "\n";
    serialize_tree(forest.entries[k].tree, out);
  }
  out << "end\n";
}

namespace {

std::string expect_key(std::istream& in, const std::string& key) {
  std::string k, v;
  if (!(in >> k >> v) || k != key)
    throw std::runtime_error("malformed forest file: expected '" + key + "'");
  return v;
}

}  // namespace

Forest parse_forest(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "asgbdt-forest" || version != 1)
    throw std::runtime_error("not a forest file");
  Forest f;
  f.n_features = static_cast<std::uint32_t>(std::stoul(expect_key(in, "n_features")));
  f.dataset_fingerprint = std::stoull(expect_key(in, "dataset_fingerprint"));
  f.f0 = std::stod(expect_key(in, "f0"));
  auto n_trees = std::stoull(expect_key(in, "n_trees"));
  expect_key(in, "draw_seed");
  expect_key(in, "feature_seed");
  expect_key(in, "sampling_rate");
  expect_key(in, "max_bins");
  expect_key(in, "max_leaves");
  expect_key(in, "min_weight_leaf");
  expect_key(in, "feature_fraction");
  f.entries.reserve(n_trees);
  for (std::uint64_t k = 0; k < n_trees; ++k) {
    std::string entry_tag, step_tag;
    std::uint64_t idx = 0;
    double step = 0.0;
    if (!(in >> entry_tag >> idx >> step_tag >> step) || entry_tag != "entry" ||
        step_tag != "step" || idx != k)
      throw std::runtime_error("malformed forest entry header");
    Forest::Entry e;
    e.step = step;
    e.tree = parse_tree(in);
    f.entries.push_back(std::move(e));
  }
  if (!(in >> tag) || tag != "end") throw std::runtime_error("forest file missing end marker");
  return f;
}

Forest parse_forest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open forest file: " + path);
  return parse_forest(in);
}

}  // namespace asgbdt
