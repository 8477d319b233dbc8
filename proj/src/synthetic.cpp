#include "asgbdt/synthetic.hpp"

#include <stdexcept>

#include "asgbdt/rng.hpp"

namespace asgbdt {

SparseDataset make_lowdiv(const std::array<std::int64_t, 3>& frequencies) {
  for (std::int64_t f : frequencies)
    if (f < 1) throw std::invalid_argument("frequencies must be positive");
  SparseDataset ds;
  ds.add_row({{0, 1.0}}, 1, frequencies[0]);
  ds.add_row({{1, 1.0}}, 1, frequencies[1]);
  ds.add_row({{1, 1.0}}, 0, frequencies[2]);
  ds.set_n_features(2);
  return ds;
}

SparseDataset make_highdiv(std::size_t n, std::uint32_t n_features, std::uint64_t seed) {
  if (n_features < 8) throw std::invalid_argument("highdiv needs at least 8 features");
  if (n == 0) throw std::invalid_argument("highdiv needs at least one sample");
  SparseDataset raw;
  raw.set_n_features(n_features);
  SplitMix64 rng(mix64(seed ^ 0x41d1));
  constexpr std::uint32_t kGrid = 200;  // distinct signal values, exact-binnable
  for (std::size_t i = 0; i < n; ++i) {
    // Signal value on a grid with a hole around 0.5 so the classes are
    // separated by a representable threshold.
    std::uint32_t cell = static_cast<std::uint32_t>(rng.next_below(kGrid));
    while (cell == kGrid / 2 - 1 || cell == kGrid / 2)
      cell = static_cast<std::uint32_t>(rng.next_below(kGrid));
    double signal = (static_cast<double>(cell) + 0.5) / kGrid;
    int label = signal > 0.5 ? 1 : 0;

    SparseRow row;
    row.push_back({0, signal});
    // A handful of noise features drawn from the remaining dimensions.
    std::vector<std::uint32_t> picked;
    while (picked.size() < 8) {
      auto f = static_cast<std::uint32_t>(1 + rng.next_below(n_features - 1));
      bool dup = false;
      for (std::uint32_t p : picked) dup = dup || p == f;
      if (!dup) picked.push_back(f);
    }
    std::sort(picked.begin(), picked.end());
    for (std::uint32_t f : picked) row.push_back({f, 0.01 + 0.99 * rng.next_unit()});
    raw.add_row(std::move(row), label);
  }
  return deduplicate(raw);
}

}  // namespace asgbdt
