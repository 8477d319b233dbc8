#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace asgbdt {

/// One sparse feature entry. Indices are zero-based in memory and strictly
/// increasing within a sample.
struct FeatureEntry {
  std::uint32_t index;
  double value;

  bool operator==(const FeatureEntry&) const = default;
};

using SparseRow = std::vector<FeatureEntry>;

/// Sparse binary-labeled dataset with duplicate rows folded into integer
/// frequencies. After deduplicate() all (features, label) pairs are distinct
/// and sum(frequencies) equals the original row count.
class SparseDataset {
 public:
  SparseDataset() = default;

  std::size_t n_samples() const { return samples_.size(); }
  std::int64_t n_raw() const { return n_raw_; }
  std::uint32_t n_features() const { return n_features_; }

  const SparseRow& sample(std::size_t i) const { return samples_[i]; }
  int label(std::size_t i) const { return labels_[i]; }
  std::int64_t frequency(std::size_t i) const { return frequencies_[i]; }

  const std::vector<std::int64_t>& frequencies() const { return frequencies_; }

  std::int64_t max_frequency() const;

  /// Feature value with sparse zero-fill.
  double feature_value(std::size_t i, std::uint32_t feature) const;

  // Construction is single-threaded; instances are immutable afterwards and
  // safe to share across concurrent readers.
  void add_row(SparseRow row, int label, std::int64_t frequency = 1);
  void set_n_features(std::uint32_t n) { n_features_ = n; }

  bool operator==(const SparseDataset&) const = default;

  /// Content hash used as a forest/dataset pairing fingerprint.
  std::uint64_t fingerprint() const;

  std::string stats_report() const;

 private:
  std::vector<SparseRow> samples_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::int64_t> frequencies_;
  std::uint32_t n_features_ = 0;
  std::int64_t n_raw_ = 0;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

/// Parse LIBSVM text: `<label> <idx>:<val> ...` per non-empty line, 1-based
/// ascending indices. Labels {1,0,+1,-1}; -1 maps to 0. Every parsed row has
/// frequency 1; call deduplicate() to fold repeats.
SparseDataset parse_libsvm(std::istream& in);
SparseDataset parse_libsvm_file(const std::string& path);

/// Merge identical (features, label) rows; frequency = occurrence count,
/// first-occurrence order preserved. Equality on values is bitwise.
SparseDataset deduplicate(const SparseDataset& raw);

/// Write as LIBSVM text, repeating each sample `frequency` times (1-based
/// indices on disk). Reparsing and deduplicating restores the dataset.
void write_libsvm(const SparseDataset& ds, std::ostream& out);

/// Seeded disjoint partition of the raw rows; each part is re-deduplicated.
/// The test part gets round(test_fraction * n_raw) rows, clamped to
/// [1, n_raw - 1]. Throws if the dataset has fewer than two raw rows.
std::pair<SparseDataset, SparseDataset> split_train_test(const SparseDataset& ds,
                                                         double test_fraction,
                                                         std::uint64_t seed);

/// Per-feature histogram bins. Features with at most max_bins distinct
/// (m-weighted) values get one bin per value; denser features get quantile
/// bins. A bin holds values v with upper_edge[b-1] < v <= upper_edge[b]; the
/// last bin is unbounded above. Absent entries land in the bin containing 0.
class FeatureBins {
 public:
  static constexpr std::uint32_t kDefaultMaxBins = 255;

  FeatureBins() = default;
  FeatureBins(const SparseDataset& ds, std::uint32_t max_bins = kDefaultMaxBins);

  std::uint32_t n_features() const { return static_cast<std::uint32_t>(edges_.size()); }
  std::uint32_t n_bins(std::uint32_t feature) const {
    return static_cast<std::uint32_t>(edges_[feature].size()) + 1;
  }

  /// Upper edge of bin b (valid for b < n_bins - 1).
  double upper_edge(std::uint32_t feature, std::uint32_t bin) const {
    return edges_[feature][bin];
  }

  std::uint32_t bin_of(std::uint32_t feature, double value) const;
  std::uint32_t zero_bin(std::uint32_t feature) const { return zero_bin_[feature]; }

 private:
  std::vector<std::vector<double>> edges_;  // per feature, sorted upper edges
  std::vector<std::uint32_t> zero_bin_;
};

}  // namespace asgbdt
