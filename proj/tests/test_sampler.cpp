#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "asgbdt/loss.hpp"
#include "asgbdt/rng.hpp"
#include "asgbdt/sampler.hpp"

using namespace asgbdt;

namespace {

SparseDataset dataset_with_frequencies(const std::vector<std::int64_t>& freqs,
                                       const std::vector<int>& labels) {
  SparseDataset ds;
  for (std::size_t i = 0; i < freqs.size(); ++i)
    ds.add_row({{static_cast<std::uint32_t>(i), 1.0}}, labels[i % labels.size()], freqs[i]);
  return ds;
}

}  // namespace

TEST_CASE("unit rates draw everything with exact weights") {
  SparseDataset ds = dataset_with_frequencies({1, 3, 7}, {1, 0});
  SampleDraw d = draw(SamplingPlan::uniform(1.0), ds, 9, 0);
  CHECK(d.support_size == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(d.support[i] == 1);
    CHECK(d.weights[i] == static_cast<double>(ds.frequency(i)));  // exact, not approximate
  }
}

TEST_CASE("a hit at rate half carries weight two") {
  SparseDataset ds = dataset_with_frequencies({1}, {1});
  SamplingPlan plan = SamplingPlan::uniform(0.5);
  bool saw_hit = false, saw_miss_retried = false;
  for (std::uint64_t idx = 0; idx < 64; ++idx) {
    SampleDraw d = draw(plan, ds, 123, idx);
    CHECK(d.support_size == 1);  // empty draws must have been resampled
    if (d.effective_index == idx) {
      saw_hit = true;
      CHECK(d.weights[0] == 2.0);
    } else {
      saw_miss_retried = true;
      CHECK(d.effective_index > idx);
      CHECK(d.weights[0] == 2.0);
    }
  }
  CHECK(saw_hit);
  CHECK(saw_miss_retried);
}

TEST_CASE("draws replay bit-identically across threads") {
  SparseDataset ds = dataset_with_frequencies({2, 5, 1, 4}, {1, 0});
  SamplingPlan plan = SamplingPlan::uniform(0.3);
  SampleDraw reference = draw(plan, ds, 77, 13);
  std::vector<SampleDraw> results(4);
  {
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
      threads.emplace_back([&, t] { results[t] = draw(plan, ds, 77, 13); });
    for (auto& t : threads) t.join();
  }
  for (const SampleDraw& d : results) {
    CHECK(d.weights == reference.weights);
    CHECK(d.support == reference.support);
    CHECK(d.effective_index == reference.effective_index);
  }
}

TEST_CASE("mean weight over many draws is the frequency") {
  SparseDataset ds = dataset_with_frequencies({1, 2, 5}, {1, 0});
  SamplingPlan plan = SamplingPlan::uniform(0.5);
  const int trials = 10000;
  std::vector<double> sums(3, 0.0);
  for (int t = 0; t < trials; ++t) {
    SampleDraw d = draw(plan, ds, 31, static_cast<std::uint64_t>(t));
    for (int i = 0; i < 3; ++i) sums[i] += d.weights[i];
  }
  for (int i = 0; i < 3; ++i) {
    double m = static_cast<double>(ds.frequency(i));
    double mean = sums[i] / trials;
    // Var(m') = m (1-R)/R = m at R = 0.5
    double se = std::sqrt(m / trials);
    CHECK(std::abs(mean - m) < 3.0 * se);
  }
}

TEST_CASE("weighted target equals the full gradient at unit rates") {
  SparseDataset ds = dataset_with_frequencies({1, 4}, {1, 0});
  ScoreVector scores{0.2, -0.4};
  SampleDraw d = draw(SamplingPlan::uniform(1.0), ds, 5, 0);
  GradientVector sampled = weighted_target(d, ds, scores);
  GradientVector full = gradient_vector(ds, scores);
  CHECK(sampled.flavor == GradientFlavor::sampled);
  for (std::size_t i = 0; i < 2; ++i) CHECK(sampled.values[i] == full.values[i]);  // bitwise
}

TEST_CASE("unsampled components are exactly zero and excluded") {
  SparseDataset ds = dataset_with_frequencies({1, 1, 1, 1, 1, 1}, {1, 0});
  SamplingPlan plan = SamplingPlan::uniform(0.4);
  ScoreVector scores(6, 0.0);
  bool saw_excluded = false;
  for (std::uint64_t idx = 0; idx < 50 && !saw_excluded; ++idx) {
    SampleDraw d = draw(plan, ds, 2024, idx);
    GradientVector g = weighted_target(d, ds, scores);
    for (std::size_t i = 0; i < 6; ++i) {
      if (!d.support[i]) {
        saw_excluded = true;
        CHECK(g.values[i] == 0.0);
        CHECK(!g.is_included(i));
      } else {
        CHECK(g.is_included(i));
      }
    }
  }
  CHECK(saw_excluded);
}

TEST_CASE("weighted target is unbiased for the gradient vector") {
  SparseDataset ds = dataset_with_frequencies({1, 3, 2}, {1, 0, 1});
  ScoreVector scores{0.5, -0.5, 1.0};
  GradientVector full = gradient_vector(ds, scores);
  const int trials = 10000;
  std::vector<double> sums(3, 0.0);
  for (int t = 0; t < trials; ++t) {
    SampleDraw d = draw(SamplingPlan::uniform(0.5), ds, 8, static_cast<std::uint64_t>(t));
    GradientVector g = weighted_target(d, ds, scores);
    for (int i = 0; i < 3; ++i) sums[i] += g.values[i];
  }
  for (int i = 0; i < 3; ++i) {
    double m = static_cast<double>(ds.frequency(i));
    double se = std::abs(logistic_gradient(ds.label(i), scores[i])) * std::sqrt(m / trials);
    CHECK(std::abs(sums[i] / trials - full.values[i]) < 4.0 * se);
  }
}

TEST_CASE("analytic delta follows the complement rule") {
  SparseDataset single = dataset_with_frequencies({1, 1}, {1, 0});
  CHECK(analytic_delta(SamplingPlan::uniform(0.3), single) == doctest::Approx(0.3).epsilon(1e-12));

  SparseDataset doubled = dataset_with_frequencies({2}, {1});
  CHECK(analytic_delta(SamplingPlan::uniform(0.5), doubled) ==
        doctest::Approx(0.75).epsilon(1e-12));  // 1 - 0.5^2

  SamplingPlan mixed = SamplingPlan::per_sample({{0.2}, {1.0}});
  CHECK(analytic_delta(mixed, single) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("analytic delta never decreases when a rate rises") {
  SparseDataset ds = dataset_with_frequencies({2, 3}, {1, 0});
  SplitMix64 rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::vector<double>> rates{{0.1 + 0.8 * rng.next_unit(), 0.1 + 0.8 * rng.next_unit()},
                                           {0.1 + 0.8 * rng.next_unit(), 0.1 + 0.8 * rng.next_unit(),
                                            0.1 + 0.8 * rng.next_unit()}};
    double before = analytic_delta(SamplingPlan::per_sample(rates), ds);
    auto bumped = rates;
    std::size_t i = rng.next_below(2);
    std::size_t j = rng.next_below(bumped[i].size());
    bumped[i][j] = std::min(1.0, bumped[i][j] + rng.next_unit() * (1.0 - bumped[i][j]));
    double after = analytic_delta(SamplingPlan::per_sample(bumped), ds);
    CHECK(after >= before - 1e-15);
  }
}

TEST_CASE("diversity at unit rate is total inclusion") {
  SparseDataset ds = dataset_with_frequencies({1, 2, 1, 1}, {1, 0});
  DiversityStats stats = estimate_diversity(SamplingPlan::uniform(1.0), ds, 50, 3);
  CHECK(stats.omega == 4);
  CHECK(stats.rho == doctest::Approx(1.0));
  CHECK(stats.delta == doctest::Approx(1.0));
  CHECK(stats.mean_support == doctest::Approx(4.0));
}

TEST_CASE("pairwise intersection rate matches exact enumeration for two samples") {
  // Two samples, frequency 1, rate 0.5. Enumerating the 16 equally likely
  // outcomes of (Q^a_1, Q^a_2, Q^b_1, Q^b_2): without conditioning the
  // supports intersect with probability 1 - (1 - 1/4)^2 = 0.4375. Empty
  // draws are resampled, which makes each realized support uniform over
  // {10, 01, 11}; only the (10, 01) and (01, 10) pairs are disjoint, so the
  // intersection probability of the draws actually delivered is 7/9.
  SparseDataset ds = dataset_with_frequencies({1, 1}, {1, 0});
  DiversityStats stats = estimate_diversity(SamplingPlan::uniform(0.5), ds, 10000, 99);
  CHECK(std::abs(stats.rho - 7.0 / 9.0) < 0.05);
  CHECK(stats.omega <= 2);
  CHECK(stats.delta == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tiny rates give sparse supports and small rho") {
  SparseDataset ds;
  for (int i = 0; i < 10000; ++i) ds.add_row({{static_cast<std::uint32_t>(i), 1.0}}, i % 2);
  DiversityStats stats = estimate_diversity(SamplingPlan::uniform(1e-3), ds, 200, 5);
  CHECK(stats.omega < 100);       // far below N = 10^4
  CHECK(stats.mean_support < 40); // ~10 expected
  CHECK(stats.rho < 0.5);
}

TEST_CASE("sampling plans validate their shape and rates") {
  SparseDataset ds = dataset_with_frequencies({2, 1}, {1, 0});
  CHECK_THROWS_AS(SamplingPlan::uniform(0.0), std::invalid_argument);
  CHECK_THROWS_AS(SamplingPlan::uniform(1.5), std::invalid_argument);
  CHECK_THROWS_AS(SamplingPlan::per_sample({{0.5, 0.0}}), std::invalid_argument);
  SamplingPlan wrong_shape = SamplingPlan::per_sample({{0.5}, {0.5}});
  CHECK_THROWS_AS(draw(wrong_shape, ds, 1, 0), std::invalid_argument);
  SamplingPlan ok = SamplingPlan::per_sample({{0.5, 0.5}, {0.5}});
  CHECK_NOTHROW(draw(ok, ds, 1, 0));
}
