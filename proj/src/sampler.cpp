#include "asgbdt/sampler.hpp"

#include <algorithm>
#include <stdexcept>

#include "asgbdt/rng.hpp"

namespace asgbdt {

SamplingPlan SamplingPlan::uniform(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
  SamplingPlan plan;
  plan.uniform_rate_ = rate;
  return plan;
}

SamplingPlan SamplingPlan::per_sample(std::vector<std::vector<double>> rates) {
  for (const auto& row : rates)
    for (double r : row)
      if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("sampling rate must be in (0, 1]");
  SamplingPlan plan;
  plan.rates_ = std::move(rates);
  return plan;
}

void SamplingPlan::validate(const SparseDataset& ds) const {
  if (rates_.empty()) return;
  if (rates_.size() != ds.n_samples())
    throw std::invalid_argument("sampling plan sample count does not match dataset");
  for (std::size_t i = 0; i < rates_.size(); ++i)
    if (static_cast<std::int64_t>(rates_[i].size()) != ds.frequency(i))
      throw std::invalid_argument("sampling plan replica count does not match frequency");
}

namespace {

// Retry stride for empty draws; server draw indices stay far below 2^32.
constexpr std::uint64_t kRetryStride = std::uint64_t{1} << 32;

bool attempt_draw(const SamplingPlan& plan, const SparseDataset& ds, std::uint64_t seed,
                  std::uint64_t index, SampleDraw& out) {
  const std::size_t n = ds.n_samples();
  out.weights.assign(n, 0.0);
  out.support.assign(n, 0);
  out.support_size = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t m = ds.frequency(i);
    double w = 0.0;
    for (std::int64_t j = 0; j < m; ++j) {
      const double r = plan.rate(i, j);
      if (uniform01(seed, index, i, static_cast<std::uint64_t>(j)) < r) w += 1.0 / r;
    }
    out.weights[i] = w;
    if (w > 0.0) {
      out.support[i] = 1;
      ++out.support_size;
    }
  }
  return out.support_size > 0;
}

}  // namespace

SampleDraw draw(const SamplingPlan& plan, const SparseDataset& ds, std::uint64_t seed,
                std::uint64_t index) {
  plan.validate(ds);
  if (ds.n_samples() == 0) throw std::invalid_argument("cannot draw from an empty dataset");
  SampleDraw d;
  d.seed = seed;
  d.index = index;
  std::uint64_t attempt = index;
  while (!attempt_draw(plan, ds, seed, attempt, d)) attempt += kRetryStride;
  d.effective_index = attempt;
  return d;
}

GradientVector weighted_target(const SampleDraw& d, const SparseDataset& ds,
                               const ScoreVector& scores) {
  if (d.weights.size() != ds.n_samples() || scores.size() != ds.n_samples())
    throw std::invalid_argument("draw/score dimension does not match dataset");
  GradientVector g;
  g.flavor = GradientFlavor::sampled;
  g.values.resize(ds.n_samples());
  g.included = d.support;
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    g.values[i] = d.support[i] ? d.weights[i] * logistic_gradient(ds.label(i), scores[i]) : 0.0;
  return g;
}

double analytic_delta(const SamplingPlan& plan, const SparseDataset& ds) {
  double best = 0.0;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    double miss = 1.0;
    for (std::int64_t j = 0; j < ds.frequency(i); ++j) miss *= 1.0 - plan.rate(i, j);
    best = std::max(best, 1.0 - miss);
  }
  return best;
}

DiversityStats estimate_diversity(const SamplingPlan& plan, const SparseDataset& ds,
                                  std::uint64_t trials, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("diversity estimation needs at least two trials");
  DiversityStats stats;
  stats.trials = trials;
  stats.delta = analytic_delta(plan, ds);

  std::vector<std::uint8_t> prev;
  std::uint64_t intersecting = 0;
  std::uint64_t support_total = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    SampleDraw d = draw(plan, ds, seed, t);
    stats.omega = std::max(stats.omega, d.support_size);
    support_total += d.support_size;
    if (t > 0) {
      bool meets = false;
      for (std::size_t i = 0; i < d.support.size() && !meets; ++i)
        meets = prev[i] != 0 && d.support[i] != 0;
      if (meets) ++intersecting;
    }
    prev = std::move(d.support);
  }
  stats.rho = static_cast<double>(intersecting) / static_cast<double>(trials - 1);
  stats.mean_support = static_cast<double>(support_total) / static_cast<double>(trials);
  return stats;
}

}  // namespace asgbdt
