#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "asgbdt/dataset.hpp"
#include "asgbdt/loss.hpp"

namespace asgbdt {

struct TreeParams {
  std::uint32_t max_leaves = 31;
  double min_weight_leaf = 1.0;  // weighted min samples per leaf
  double feature_fraction = 1.0;
  std::uint64_t feature_seed = 0;
};

/// Binary regression tree. Routing: feature value <= threshold goes left;
/// absent features read as 0. Leaves hold the weighted mean of the
/// per-sample targets that reached them during fitting.
class RegressionTree {
 public:
  struct Node {
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::uint32_t feature = 0;
    std::uint32_t bin = 0;     // split bin (training-side routing)
    double threshold = 0.0;    // upper edge of `bin` (predict-side routing)
    double value = 0.0;        // leaf output
    bool is_leaf() const { return left < 0; }
  };

  std::vector<Node> nodes;       // nodes[0] is the root
  std::uint64_t draw_index = 0;  // which draw the fit target came from

  std::size_t n_leaves() const;
  double predict(const SparseRow& row) const;
  /// Leaf reached by a sample (index into `nodes`).
  std::uint32_t route(const SparseRow& row) const;

  bool operator==(const RegressionTree&) const = default;
};

/// Samples eligible for fitting (the draw support) plus the bin index layout.
struct DatasetView {
  const SparseDataset* ds = nullptr;
  const FeatureBins* bins = nullptr;
  std::vector<std::uint32_t> included;

  static DatasetView all(const SparseDataset& ds, const FeatureBins& bins);
  static DatasetView from_support(const SparseDataset& ds, const FeatureBins& bins,
                                  const std::vector<std::uint8_t>& support);
};

/// Leaf-wise best-first growth: repeatedly split the open leaf whose best
/// split gives the largest weighted variance reduction of the per-sample
/// values target[i] / weight[i], over a seeded feature subset, until
/// max_leaves is reached or no split has positive gain. Ties break toward
/// the lower feature index, then the lower threshold.
RegressionTree fit_tree(const DatasetView& view, const GradientVector& target,
                        std::span<const double> weights, const TreeParams& params);

/// Partition of a dataset's samples by the leaf each one routes to.
struct LeafPartition {
  std::vector<std::uint32_t> leaf_of;               // per sample: index into members
  std::vector<std::vector<std::uint32_t>> members;  // per leaf block: sample indices
};

LeafPartition leaf_partition(const RegressionTree& tree, const SparseDataset& ds);

/// Weighted leaf-mean broadcast: output_i = sum_{r in leaf(i)} w_r g_r /
/// sum_{r in leaf(i)} w_r. This is the leaf-averaging projection the tree
/// applies to a per-sample vector. Idempotent; leaf-constant vectors are
/// fixed points. Throws on a block whose total weight is zero.
std::vector<double> project(const LeafPartition& p, std::span<const double> g,
                            std::span<const double> w);

/// Number of components the projection actually changes: |Ag - g| > tol.
std::size_t zeta_estimate(const LeafPartition& p, std::span<const double> g,
                          std::span<const double> w, double tol);

/// Max over leaves of the max pairwise feature-vector distance inside the
/// leaf; 0 when every leaf is a singleton.
double max_intra_leaf_distance(const LeafPartition& p, const SparseDataset& ds);

// Line-oriented text form, stable across versions for golden tests.
void serialize_tree(const RegressionTree& tree, std::ostream& out);
RegressionTree parse_tree(std::istream& in);

}  // namespace asgbdt
