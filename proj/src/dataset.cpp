#include "asgbdt/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "asgbdt/rng.hpp"

namespace asgbdt {

namespace {

std::uint64_t value_bits(double v) { return std::bit_cast<std::uint64_t>(v); }

std::uint64_t row_hash(const SparseRow& row, int label) {
  std::uint64_t h = mix64(0x5be5u ^ static_cast<std::uint64_t>(label));
  for (const auto& e : row) {
    h = mix64(h ^ e.index);
    h = mix64(h ^ value_bits(e.value));
  }
  return h;
}

}  // namespace

void SparseDataset::add_row(SparseRow row, int label, std::int64_t frequency) {
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  if (frequency < 1) throw std::invalid_argument("frequency must be >= 1");
  std::uint32_t prev = 0;
  bool first = true;
  for (const auto& e : row) {
    if (!first && e.index <= prev)
      throw std::invalid_argument("feature indices must be strictly increasing");
    prev = e.index;
    first = false;
    if (e.index + 1 > n_features_) n_features_ = e.index + 1;
  }
  samples_.push_back(std::move(row));
  labels_.push_back(static_cast<std::uint8_t>(label));
  frequencies_.push_back(frequency);
  n_raw_ += frequency;
}

double SparseDataset::feature_value(std::size_t i, std::uint32_t feature) const {
  const SparseRow& row = samples_[i];
  auto it = std::lower_bound(row.begin(), row.end(), feature,
                             [](const FeatureEntry& e, std::uint32_t f) { return e.index < f; });
  if (it != row.end() && it->index == feature) return it->value;
  return 0.0;
}

std::int64_t SparseDataset::max_frequency() const {
  std::int64_t m = 0;
  for (std::int64_t f : frequencies_) m = std::max(m, f);
  return m;
}

std::uint64_t SparseDataset::fingerprint() const {
  std::uint64_t h = mix64(0xda7a ^ static_cast<std::uint64_t>(n_features_));
  for (std::size_t i = 0; i < n_samples(); ++i) {
    h = mix64(h ^ row_hash(samples_[i], labels_[i]));
    h = mix64(h ^ static_cast<std::uint64_t>(frequencies_[i]));
  }
  return h;
}

std::string SparseDataset::stats_report() const {
  std::ostringstream out;
  out << "n_samples=" << n_samples() << "\n";
  out << "n_raw=" << n_raw() << "\n";
  out << "n_features=" << n_features() << "\n";
  double ratio = n_samples() == 0 ? 0.0
                                  : static_cast<double>(n_raw()) / static_cast<double>(n_samples());
  out << "duplication_ratio=" << ratio << "\n";
  return out.str();
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;  // from_chars rejects leading '+'
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

bool parse_u32(std::string_view tok, std::uint32_t& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in) {
  SparseDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;

    std::size_t end = line.find_first_of(" \t\r", pos);
    std::string_view label_tok(line.data() + pos, (end == std::string::npos ? line.size() : end) - pos);
    double label_val = 0;
    if (!parse_double(label_tok, label_val))
      throw ParseError("malformed label '" + std::string(label_tok) + "'", line_no);
    int label;
    if (label_val == 1.0)
      label = 1;
    else if (label_val == 0.0)
      label = 0;
    else if (label_val == -1.0)
      label = 0;
    else
      throw ParseError("label must be one of {0, 1, +1, -1}", line_no);

    SparseRow row;
    pos = end;
    std::uint32_t prev_idx = 0;
    bool first = true;
    while (pos != std::string::npos) {
      pos = line.find_first_not_of(" \t\r", pos);
      if (pos == std::string::npos) break;
      end = line.find_first_of(" \t\r", pos);
      std::string_view tok(line.data() + pos, (end == std::string::npos ? line.size() : end) - pos);
      pos = end;

      std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError("expected <index>:<value>, got '" + std::string(tok) + "'", line_no);
      std::uint32_t idx = 0;
      double val = 0;
      if (!parse_u32(tok.substr(0, colon), idx) || idx == 0)
        throw ParseError("malformed feature index in '" + std::string(tok) + "'", line_no);
      if (!parse_double(tok.substr(colon + 1), val))
        throw ParseError("malformed feature value in '" + std::string(tok) + "'", line_no);
      if (!first && idx <= prev_idx)
        throw ParseError("feature indices must be strictly ascending", line_no);
      prev_idx = idx;
      first = false;
      row.push_back({idx - 1, val});  // 1-based on disk, 0-based in memory
    }
    ds.add_row(std::move(row), label);
  }
  return ds;
}

SparseDataset parse_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return parse_libsvm(in);
}

SparseDataset deduplicate(const SparseDataset& raw) {
  SparseDataset out;
  out.set_n_features(raw.n_features());
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;  // hash -> out indices
  std::vector<std::int64_t> freqs;
  std::vector<const SparseRow*> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < raw.n_samples(); ++i) {
    std::uint64_t h = row_hash(raw.sample(i), raw.label(i));
    auto& bucket = buckets[h];
    bool found = false;
    for (std::size_t j : bucket) {
      if (labels[j] == raw.label(i) && *rows[j] == raw.sample(i)) {
        freqs[j] += raw.frequency(i);
        found = true;
        break;
      }
    }
    if (!found) {
      bucket.push_back(rows.size());
      rows.push_back(&raw.sample(i));
      labels.push_back(raw.label(i));
      freqs.push_back(raw.frequency(i));
    }
  }
  for (std::size_t j = 0; j < rows.size(); ++j) out.add_row(*rows[j], labels[j], freqs[j]);
  return out;
}

void write_libsvm(const SparseDataset& ds, std::ostream& out) {
  char buf[64];
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    std::string line = ds.label(i) == 1 ? "1" : "0";
    for (const auto& e : ds.sample(i)) {
      line += ' ';
      line += std::to_string(e.index + 1);
      line += ':';
      int n = std::snprintf(buf, sizeof buf, "%.17g", e.value);
      line.append(buf, static_cast<std::size_t>(n));
    }
    line += '\n';
    for (std::int64_t k = 0; k < ds.frequency(i); ++k) out << line;
  }
}

std::pair<SparseDataset, SparseDataset> split_train_test(const SparseDataset& ds,
                                                         double test_fraction,
                                                         std::uint64_t seed) {
  if (ds.n_raw() < 2) throw std::invalid_argument("need at least two raw rows to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must be in (0, 1)");

  std::vector<std::size_t> raw_rows;
  raw_rows.reserve(static_cast<std::size_t>(ds.n_raw()));
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    for (std::int64_t k = 0; k < ds.frequency(i); ++k) raw_rows.push_back(i);

  SplitMix64 rng(mix64(seed ^ 0x5b117));
  deterministic_shuffle(raw_rows, rng);

  auto n_test = static_cast<std::int64_t>(std::llround(test_fraction * static_cast<double>(ds.n_raw())));
  n_test = std::clamp<std::int64_t>(n_test, 1, ds.n_raw() - 1);

  SparseDataset test_raw, train_raw;
  test_raw.set_n_features(ds.n_features());
  train_raw.set_n_features(ds.n_features());
  for (std::size_t k = 0; k < raw_rows.size(); ++k) {
    auto& part = (static_cast<std::int64_t>(k) < n_test) ? test_raw : train_raw;
    part.add_row(ds.sample(raw_rows[k]), ds.label(raw_rows[k]));
  }
  return {deduplicate(train_raw), deduplicate(test_raw)};
}

FeatureBins::FeatureBins(const SparseDataset& ds, std::uint32_t max_bins) {
  if (max_bins < 2) throw std::invalid_argument("max_bins must be >= 2");
  const std::uint32_t n_feat = ds.n_features();
  edges_.resize(n_feat);
  zero_bin_.resize(n_feat, 0);

  // Per-feature m-weighted value multiset, with absent entries counted at 0.
  std::vector<std::vector<std::pair<double, std::int64_t>>> values(n_feat);
  std::vector<std::int64_t> present_weight(n_feat, 0);
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    for (const auto& e : ds.sample(i)) {
      values[e.index].push_back({e.value, ds.frequency(i)});
      present_weight[e.index] += ds.frequency(i);
    }
  }

  for (std::uint32_t f = 0; f < n_feat; ++f) {
    auto& vals = values[f];
    if (ds.n_raw() > present_weight[f]) vals.push_back({0.0, ds.n_raw() - present_weight[f]});
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Collapse duplicates into (distinct value, total weight).
    std::vector<std::pair<double, std::int64_t>> distinct;
    for (const auto& [v, w] : vals) {
      if (!distinct.empty() && distinct.back().first == v)
        distinct.back().second += w;
      else
        distinct.push_back({v, w});
    }

    auto& edges = edges_[f];
    if (distinct.size() <= max_bins) {
      for (std::size_t k = 0; k + 1 < distinct.size(); ++k) edges.push_back(distinct[k].first);
    } else {
      // Weighted quantile cuts; edges at midpoints between straddling values.
      const double total = static_cast<double>(ds.n_raw());
      std::uint32_t next_cut = 1;
      double cum = 0;
      for (std::size_t k = 0; k + 1 < distinct.size() && next_cut < max_bins; ++k) {
        cum += static_cast<double>(distinct[k].second);
        if (cum >= total * next_cut / max_bins) {
          edges.push_back(0.5 * (distinct[k].first + distinct[k + 1].first));
          while (next_cut < max_bins && cum >= total * next_cut / max_bins) ++next_cut;
        }
      }
    }
    zero_bin_[f] = bin_of(f, 0.0);
  }
}

std::uint32_t FeatureBins::bin_of(std::uint32_t feature, double value) const {
  const auto& edges = edges_[feature];
  auto it = std::lower_bound(edges.begin(), edges.end(), value);
  return static_cast<std::uint32_t>(it - edges.begin());
}

}  // namespace asgbdt
