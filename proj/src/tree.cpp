#include "asgbdt/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "asgbdt/rng.hpp"

namespace asgbdt {

std::size_t RegressionTree::n_leaves() const {
  std::size_t n = 0;
  for (const Node& node : nodes) n += node.is_leaf();
  return n;
}

std::uint32_t RegressionTree::route(const SparseRow& row) const {
  std::uint32_t id = 0;
  while (!nodes[id].is_leaf()) {
    const Node& n = nodes[id];
    double v = 0.0;
    auto it = std::lower_bound(row.begin(), row.end(), n.feature,
                               [](const FeatureEntry& e, std::uint32_t f) { return e.index < f; });
    if (it != row.end() && it->index == n.feature) v = it->value;
    id = static_cast<std::uint32_t>(v <= n.threshold ? n.left : n.right);
  }
  return id;
}

double RegressionTree::predict(const SparseRow& row) const { return nodes[route(row)].value; }

DatasetView DatasetView::all(const SparseDataset& ds, const FeatureBins& bins) {
  DatasetView v{&ds, &bins, {}};
  v.included.resize(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i) v.included[i] = static_cast<std::uint32_t>(i);
  return v;
}

DatasetView DatasetView::from_support(const SparseDataset& ds, const FeatureBins& bins,
                                      const std::vector<std::uint8_t>& support) {
  DatasetView v{&ds, &bins, {}};
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i]) v.included.push_back(static_cast<std::uint32_t>(i));
  return v;
}

namespace {

struct SplitCand {
  bool valid = false;
  double gain = 0.0;
  std::uint32_t feature = 0;
  std::uint32_t bin = 0;

  // Lower feature index, then lower threshold, wins ties.
  bool beats(const SplitCand& other) const {
    if (!other.valid) return valid;
    if (!valid) return false;
    if (gain != other.gain) return gain > other.gain;
    if (feature != other.feature) return feature < other.feature;
    return bin < other.bin;
  }
};

constexpr double kMinGain = 1e-12;

struct LeafBuild {
  std::vector<std::uint32_t> members;  // positions into the flat sample arrays
  double sum_w = 0.0;
  double sum_wv = 0.0;
  std::int32_t node = 0;
  SplitCand best;
};

class TreeFitter {
 public:
  TreeFitter(const DatasetView& view, const GradientVector& target,
             std::span<const double> weights, const TreeParams& params)
      : view_(view), params_(params) {
    const SparseDataset& ds = *view.ds;
    if (view.included.empty()) throw std::invalid_argument("cannot fit a tree on an empty view");
    if (target.values.size() != ds.n_samples() || weights.size() != ds.n_samples())
      throw std::invalid_argument("target/weight dimension does not match dataset");
    if (params.max_leaves < 1) throw std::invalid_argument("max_leaves must be >= 1");
    if (!(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0))
      throw std::invalid_argument("feature_fraction must be in (0, 1]");

    samples_.reserve(view.included.size());
    values_.reserve(view.included.size());
    weights_.reserve(view.included.size());
    for (std::uint32_t s : view.included) {
      double w = weights[s];
      if (!(w > 0.0)) throw std::invalid_argument("included sample has non-positive weight");
      samples_.push_back(s);
      weights_.push_back(w);
      values_.push_back(target.values[s] / w);
    }
    pick_features();
    hist_w_.resize(features_.size());
    hist_wv_.resize(features_.size());
    for (std::size_t k = 0; k < features_.size(); ++k) {
      hist_w_[k].resize(view.bins->n_bins(features_[k]));
      hist_wv_[k].resize(view.bins->n_bins(features_[k]));
    }
    feature_slot_.assign(ds.n_features(), -1);
    for (std::size_t k = 0; k < features_.size(); ++k) feature_slot_[features_[k]] = static_cast<std::int32_t>(k);
  }

  RegressionTree run() {
    RegressionTree tree;

    LeafBuild root;
    root.members.resize(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) root.members[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      root.sum_w += weights_[i];
      root.sum_wv += weights_[i] * values_[i];
    }
    root.node = 0;
    tree.nodes.push_back(make_leaf(root));

    std::vector<LeafBuild> open;
    find_best_split(root);
    open.push_back(std::move(root));

    while (tree.n_leaves() < params_.max_leaves) {
      // Best-first: pick the open leaf with the winning candidate.
      std::size_t pick = open.size();
      for (std::size_t i = 0; i < open.size(); ++i) {
        if (!open[i].best.valid) continue;
        if (pick == open.size() || open[i].best.beats(open[pick].best)) pick = i;
      }
      if (pick == open.size()) break;  // no positive-gain split anywhere

      LeafBuild leaf = std::move(open[pick]);
      open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

      LeafBuild left, right;
      apply_split(leaf, left, right);

      left.node = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back(make_leaf(left));
      right.node = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back(make_leaf(right));

      RegressionTree::Node& parent = tree.nodes[static_cast<std::size_t>(leaf.node)];
      parent.left = left.node;
      parent.right = right.node;
      parent.feature = leaf.best.feature;
      parent.bin = leaf.best.bin;
      parent.threshold = view_.bins->upper_edge(leaf.best.feature, leaf.best.bin);
      parent.value = 0.0;

      find_best_split(left);
      find_best_split(right);
      open.push_back(std::move(left));
      open.push_back(std::move(right));
    }
    return tree;
  }

 private:
  RegressionTree::Node make_leaf(const LeafBuild& leaf) const {
    RegressionTree::Node n;
    n.value = leaf.sum_wv / leaf.sum_w;
    return n;
  }

  void pick_features() {
    const std::uint32_t n_feat = view_.ds->n_features();
    auto k = static_cast<std::uint32_t>(
        std::ceil(params_.feature_fraction * static_cast<double>(n_feat)));
    k = std::min(std::max<std::uint32_t>(k, 1), n_feat);
    features_.resize(n_feat);
    for (std::uint32_t f = 0; f < n_feat; ++f) features_[f] = f;
    if (k < n_feat) {
      SplitMix64 rng(hash_key(params_.feature_seed, 0x8f3a));
      for (std::uint32_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::uint32_t>(rng.next_below(n_feat - i));
        std::swap(features_[i], features_[j]);
      }
      features_.resize(k);
      std::sort(features_.begin(), features_.end());
    }
  }

  std::uint32_t bin_of_sample(std::uint32_t pos, std::uint32_t feature) const {
    const SparseRow& row = view_.ds->sample(samples_[pos]);
    auto it = std::lower_bound(row.begin(), row.end(), feature,
                               [](const FeatureEntry& e, std::uint32_t f) { return e.index < f; });
    if (it != row.end() && it->index == feature) return view_.bins->bin_of(feature, it->value);
    return view_.bins->zero_bin(feature);
  }

  void find_best_split(LeafBuild& leaf) {
    leaf.best = SplitCand{};
    if (leaf.members.size() < 2) return;

    for (std::size_t k = 0; k < features_.size(); ++k) {
      std::fill(hist_w_[k].begin(), hist_w_[k].end(), 0.0);
      std::fill(hist_wv_[k].begin(), hist_wv_[k].end(), 0.0);
    }
    // One pass over the members' sparse rows; absent entries are folded into
    // each feature's zero bin afterwards via the leaf totals.
    std::vector<double> present_w(features_.size(), 0.0);
    std::vector<double> present_wv(features_.size(), 0.0);
    for (std::uint32_t pos : leaf.members) {
      const double w = weights_[pos];
      const double wv = w * values_[pos];
      for (const FeatureEntry& e : view_.ds->sample(samples_[pos])) {
        std::int32_t slot = feature_slot_[e.index];
        if (slot < 0) continue;
        std::uint32_t b = view_.bins->bin_of(e.index, e.value);
        hist_w_[static_cast<std::size_t>(slot)][b] += w;
        hist_wv_[static_cast<std::size_t>(slot)][b] += wv;
        present_w[static_cast<std::size_t>(slot)] += w;
        present_wv[static_cast<std::size_t>(slot)] += wv;
      }
    }

    const double total_w = leaf.sum_w;
    const double total_wv = leaf.sum_wv;
    const double parent_score = total_wv * total_wv / total_w;
    // Absolute floor plus a scale-relative term so cancellation noise at
    // large weights never reads as a positive gain.
    const double min_gain = kMinGain * std::max(1.0, std::abs(parent_score));

    for (std::size_t k = 0; k < features_.size(); ++k) {
      const std::uint32_t f = features_[k];
      const std::uint32_t zb = view_.bins->zero_bin(f);
      hist_w_[k][zb] += total_w - present_w[k];
      hist_wv_[k][zb] += total_wv - present_wv[k];

      const std::uint32_t n_bins = view_.bins->n_bins(f);
      double left_w = 0.0, left_wv = 0.0;
      for (std::uint32_t b = 0; b + 1 < n_bins; ++b) {
        left_w += hist_w_[k][b];
        left_wv += hist_wv_[k][b];
        const double right_w = total_w - left_w;
        const double right_wv = total_wv - left_wv;
        if (left_w < params_.min_weight_leaf || right_w < params_.min_weight_leaf) continue;
        if (!(left_w > 0.0) || !(right_w > 0.0)) continue;
        const double gain =
            left_wv * left_wv / left_w + right_wv * right_wv / right_w - parent_score;
        if (gain <= min_gain) continue;
        SplitCand cand{true, gain, f, b};
        if (cand.beats(leaf.best)) leaf.best = cand;
      }
    }
  }

  void apply_split(const LeafBuild& leaf, LeafBuild& left, LeafBuild& right) const {
    for (std::uint32_t pos : leaf.members) {
      bool go_left = bin_of_sample(pos, leaf.best.feature) <= leaf.best.bin;
      LeafBuild& side = go_left ? left : right;
      side.members.push_back(pos);
      side.sum_w += weights_[pos];
      side.sum_wv += weights_[pos] * values_[pos];
    }
  }

  const DatasetView& view_;
  const TreeParams& params_;
  std::vector<std::uint32_t> samples_;  // dataset indices of included samples
  std::vector<double> values_;          // per-sample fit target g_i / w_i
  std::vector<double> weights_;
  std::vector<std::uint32_t> features_;     // sorted feature subset
  std::vector<std::int32_t> feature_slot_;  // feature -> subset slot or -1
  std::vector<std::vector<double>> hist_w_;
  std::vector<std::vector<double>> hist_wv_;
};

}  // namespace

RegressionTree fit_tree(const DatasetView& view, const GradientVector& target,
                        std::span<const double> weights, const TreeParams& params) {
  return TreeFitter(view, target, weights, params).run();
}

LeafPartition leaf_partition(const RegressionTree& tree, const SparseDataset& ds) {
  LeafPartition p;
  std::vector<std::int32_t> block_of_node(tree.nodes.size(), -1);
  p.leaf_of.resize(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    std::uint32_t node = tree.route(ds.sample(i));
    if (block_of_node[node] < 0) {
      block_of_node[node] = static_cast<std::int32_t>(p.members.size());
      p.members.emplace_back();
    }
    auto block = static_cast<std::uint32_t>(block_of_node[node]);
    p.leaf_of[i] = block;
    p.members[block].push_back(static_cast<std::uint32_t>(i));
  }
  return p;
}

std::vector<double> project(const LeafPartition& p, std::span<const double> g,
                            std::span<const double> w) {
  if (g.size() != p.leaf_of.size() || w.size() != p.leaf_of.size())
    throw std::invalid_argument("vector dimension does not match partition");
  std::vector<double> block_w(p.members.size(), 0.0);
  std::vector<double> block_wg(p.members.size(), 0.0);
  for (std::size_t b = 0; b < p.members.size(); ++b) {
    for (std::uint32_t i : p.members[b]) {
      block_w[b] += w[i];
      block_wg[b] += w[i] * g[i];
    }
    if (!(block_w[b] > 0.0)) throw std::invalid_argument("partition block has zero total weight");
  }
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = block_wg[p.leaf_of[i]] / block_w[p.leaf_of[i]];
  return out;
}

std::size_t zeta_estimate(const LeafPartition& p, std::span<const double> g,
                          std::span<const double> w, double tol) {
  std::vector<double> proj = project(p, g, w);
  std::size_t count = 0;
  for (std::size_t i = 0; i < proj.size(); ++i)
    if (std::abs(proj[i] - g[i]) > tol) ++count;
  return count;
}

namespace {

double sparse_distance(const SparseRow& a, const SparseRow& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].index < b[j].index)) {
      sum += a[i].value * a[i].value;
      ++i;
    } else if (i == a.size() || b[j].index < a[i].index) {
      sum += b[j].value * b[j].value;
      ++j;
    } else {
      double d = a[i].value - b[j].value;
      sum += d * d;
      ++i;
      ++j;
    }
  }
  return std::sqrt(sum);
}

}  // namespace

double max_intra_leaf_distance(const LeafPartition& p, const SparseDataset& ds) {
  double best = 0.0;
  for (const auto& block : p.members)
    for (std::size_t i = 0; i < block.size(); ++i)
      for (std::size_t j = i + 1; j < block.size(); ++j)
        best = std::max(best, sparse_distance(ds.sample(block[i]), ds.sample(block[j])));
  return best;
}

void serialize_tree(const RegressionTree& tree, std::ostream& out) {
  char buf[64];
  out << "tree " << tree.nodes.size() << " " << tree.draw_index << "\n";
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    const auto& n = tree.nodes[id];
    if (n.is_leaf()) {
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out << "node " << id << " leaf " << buf << "\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", n.threshold);
      out << "node " << id << " split " << n.feature << " " << buf << " " << n.left << " "
          << n.right << "\n";
    }
  }
}

RegressionTree parse_tree(std::istream& in) {
  RegressionTree tree;
  std::string tag;
  std::size_t n_nodes = 0;
  if (!(in >> tag >> n_nodes >> tree.draw_index) || tag != "tree")
    throw std::runtime_error("malformed tree header");
  tree.nodes.resize(n_nodes);
  for (std::size_t k = 0; k < n_nodes; ++k) {
    std::size_t id = 0;
    std::string kind;
    if (!(in >> tag >> id >> kind) || tag != "node" || id >= n_nodes)
      throw std::runtime_error("malformed tree node line");
    RegressionTree::Node& n = tree.nodes[id];
    if (kind == "leaf") {
      if (!(in >> n.value)) throw std::runtime_error("malformed leaf value");
    } else if (kind == "split") {
      if (!(in >> n.feature >> n.threshold >> n.left >> n.right))
        throw std::runtime_error("malformed split node");
    } else {
      throw std::runtime_error("unknown tree node kind: " + kind);
    }
  }
  return tree;
}

}  // namespace asgbdt
