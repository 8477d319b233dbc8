#pragma once

#include <cstdint>
#include <vector>

#include "asgbdt/dataset.hpp"
#include "asgbdt/loss.hpp"

namespace asgbdt {

/// Per-(sample, replica) Bernoulli inclusion rates. Each distinct sample i
/// has frequency(i) replicas, each kept with probability rate(i, j). Rates
/// are in (0, 1]; a zero rate has no defined inverse-probability weight.
class SamplingPlan {
 public:
  static SamplingPlan uniform(double rate);
  static SamplingPlan per_sample(std::vector<std::vector<double>> rates);

  bool is_uniform() const { return rates_.empty(); }
  double uniform_rate() const { return uniform_rate_; }

  double rate(std::size_t sample, std::int64_t replica) const {
    return rates_.empty() ? uniform_rate_ : rates_[sample][static_cast<std::size_t>(replica)];
  }

  /// Throws unless the per-sample replica counts match ds frequencies.
  void validate(const SparseDataset& ds) const;

 private:
  double uniform_rate_ = 1.0;
  std::vector<std::vector<double>> rates_;  // empty when uniform
};

/// One observed sampling outcome: inverse-probability weights
/// m'_i = sum_j Q_ij / R_ij and the support bits Q'_i = OR_j Q_ij.
/// Replayable from (seed, index); if a draw comes up empty it is retried at
/// index + k * 2^32 and the index actually used is recorded.
struct SampleDraw {
  std::vector<double> weights;          // m'_i
  std::vector<std::uint8_t> support;    // Q'_i
  std::uint64_t seed = 0;
  std::uint64_t index = 0;              // requested draw index
  std::uint64_t effective_index = 0;    // index of the non-empty attempt used
  std::size_t support_size = 0;         // number of Q'_i = 1
};

/// Monte Carlo / analytic spread statistics of a sampling plan.
struct DiversityStats {
  std::size_t omega = 0;   // max distinct samples seen in one draw
  double delta = 0.0;      // max_i P(Q'_i = 1), analytic
  double rho = 0.0;        // fraction of consecutive draw pairs with intersecting support
  double mean_support = 0.0;
  std::uint64_t trials = 0;
};

/// Draw the Bernoulli matrix for (seed, index). Each Q_ij is a pure function
/// of (seed, index, i, j), so draws replay bit-identically across runs and
/// thread counts and workers need no coordination.
SampleDraw draw(const SamplingPlan& plan, const SparseDataset& ds, std::uint64_t seed,
                std::uint64_t index);

/// [m'_1 * l'_1, ..., m'_N * l'_N]; components outside the draw support are
/// exactly zero and flagged excluded.
GradientVector weighted_target(const SampleDraw& d, const SparseDataset& ds,
                               const ScoreVector& scores);

/// max_i [1 - prod_j (1 - R_ij)]
double analytic_delta(const SamplingPlan& plan, const SparseDataset& ds);

/// Runs `trials` consecutive draws at the given seed. Deterministic.
DiversityStats estimate_diversity(const SamplingPlan& plan, const SparseDataset& ds,
                                  std::uint64_t trials, std::uint64_t seed);

}  // namespace asgbdt
