#include "asgbdt/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asgbdt {

double sigmoid2(double score) {
  double p = 1.0 / (1.0 + std::exp(-2.0 * score));
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

double logistic_loss(int label, double score) {
  double p = sigmoid2(score);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double logistic_gradient(int label, double score) {
  return 2.0 * (sigmoid2(score) - static_cast<double>(label));
}

double total_loss(const SparseDataset& ds, const ScoreVector& scores) {
  if (scores.size() != ds.n_samples())
    throw std::invalid_argument("score vector dimension does not match dataset");
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    sum += static_cast<double>(ds.frequency(i)) * logistic_loss(ds.label(i), scores[i]);
  return sum;
}

GradientVector gradient_vector(const SparseDataset& ds, const ScoreVector& scores) {
  if (scores.size() != ds.n_samples())
    throw std::invalid_argument("score vector dimension does not match dataset");
  GradientVector g;
  g.flavor = GradientFlavor::full;
  g.values.resize(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    g.values[i] = static_cast<double>(ds.frequency(i)) * logistic_gradient(ds.label(i), scores[i]);
  return g;
}

}  // namespace asgbdt
