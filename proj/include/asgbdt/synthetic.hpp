#pragma once

#include <array>
#include <cstdint>

#include "asgbdt/dataset.hpp"

namespace asgbdt {

/// Low-diversity corpus: three distinct samples with large frequencies. Two
/// of them share a feature vector but disagree on the label, so the reachable
/// optimum is finite and delayed updates show up as oscillation. Returned
/// deduplicated.
SparseDataset make_lowdiv(const std::array<std::int64_t, 3>& frequencies = {10000, 20000, 30000});

/// High-diversity corpus: n distinct sparse rows over n_features dimensions,
/// frequency 1 each. The label is a margin-separated threshold on feature 0
/// (value grid keeps it exactly splittable); the other active features are
/// noise. Returned deduplicated.
SparseDataset make_highdiv(std::size_t n, std::uint32_t n_features, std::uint64_t seed);

}  // namespace asgbdt
