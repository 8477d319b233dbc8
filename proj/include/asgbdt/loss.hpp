#pragma once

#include <cstdint>
#include <vector>

#include "asgbdt/dataset.hpp"

namespace asgbdt {

/// Per-distinct-sample model score F_i = F(x_i).
using ScoreVector = std::vector<double>;

enum class GradientFlavor { full, sampled };

/// Per-distinct-sample gradient target. `full` carries m_i * l'_i for every
/// sample; `sampled` carries the reweighted m'_i * l'_i with zeros at samples
/// the draw excluded (tree fitting sees only included ones).
struct GradientVector {
  std::vector<double> values;
  GradientFlavor flavor = GradientFlavor::full;
  std::vector<std::uint8_t> included;  // empty for full flavor (all included)

  bool is_included(std::size_t i) const { return included.empty() || included[i] != 0; }
};

// Binary classification with p = 1 / (1 + e^{-2F}); p is clamped away from
// {0, 1} so the loss stays finite at extreme scores.
inline constexpr double kProbClamp = 1e-15;

double sigmoid2(double score);  // the clamped p above
double logistic_loss(int label, double score);
double logistic_gradient(int label, double score);  // 2 * (p - label)

/// sum_i m_i * l(y_i, F_i)
double total_loss(const SparseDataset& ds, const ScoreVector& scores);

/// [m_1 l'_1, ..., m_N l'_N]
GradientVector gradient_vector(const SparseDataset& ds, const ScoreVector& scores);

}  // namespace asgbdt
