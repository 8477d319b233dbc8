#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "asgbdt/loss.hpp"
#include "asgbdt/rng.hpp"

using namespace asgbdt;

namespace {

// Independent oracle: central finite differences of the loss.
double fd_gradient(int label, double score, double h = 1e-6) {
  return (logistic_loss(label, score + h) - logistic_loss(label, score - h)) / (2.0 * h);
}

SparseDataset two_sample_dataset() {
  SparseDataset ds;
  ds.add_row({{0, 1.0}}, 1);
  ds.add_row({{1, 1.0}}, 0);
  return ds;
}

}  // namespace

TEST_CASE("logistic loss at zero score is log 2 for both labels") {
  CHECK(logistic_loss(1, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(logistic_loss(0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("confident correct score gives a tiny loss") {
  // log(1 + e^{-10}) evaluated independently
  double expected = std::log1p(std::exp(-10.0));
  CHECK(logistic_loss(1, 5.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(logistic_loss(1, 5.0) < 1e-4);
  CHECK(logistic_loss(1, 5.0) > 0.0);
}

TEST_CASE("loss stays finite at extreme scores thanks to the probability clamp") {
  CHECK(std::isfinite(logistic_loss(1, -1000.0)));
  CHECK(std::isfinite(logistic_loss(0, 1000.0)));
  CHECK(logistic_loss(1, -1000.0) == doctest::Approx(-std::log(kProbClamp)).epsilon(1e-9));
}

TEST_CASE("gradient at zero score matches the finite-difference oracle") {
  CHECK(logistic_gradient(1, 0.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(logistic_gradient(0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(logistic_gradient(1, 0.0) == doctest::Approx(fd_gradient(1, 0.0)).epsilon(1e-8));
  CHECK(logistic_gradient(0, 0.0) == doctest::Approx(fd_gradient(0, 0.0)).epsilon(1e-8));
}

TEST_CASE("gradient vanishes for confidently correct scores") {
  // 2 (p - 1) at F = 5: p = 1 / (1 + e^{-10})
  double expected = 2.0 * (1.0 / (1.0 + std::exp(-10.0)) - 1.0);
  CHECK(logistic_gradient(1, 5.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(logistic_gradient(1, 5.0)) < 1e-4);
  CHECK(std::abs(logistic_gradient(1, 18.0)) < 1e-8);  // clamped region
}

TEST_CASE("gradient matches finite differences on a grid") {
  for (int label : {0, 1}) {
    for (int i = 0; i <= 32; ++i) {
      double score = -4.0 + 8.0 * i / 32.0;
      double got = logistic_gradient(label, score);
      double want = fd_gradient(label, score);
      CHECK(std::abs(got - want) <= 1e-5 * std::max(1e-30, std::abs(want)));
    }
  }
}

TEST_CASE("total loss weights terms by frequency") {
  SparseDataset ds;
  ds.add_row({{0, 1.0}}, 1, 3);
  CHECK(total_loss(ds, {0.0}) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));

  SparseDataset pair;
  pair.add_row({{0, 1.0}}, 1, 1);
  pair.add_row({{1, 1.0}}, 0, 2);
  double a = logistic_loss(1, 0.3), b = logistic_loss(0, -0.7);
  CHECK(total_loss(pair, {0.3, -0.7}) == doctest::Approx(a + 2.0 * b).epsilon(1e-12));
}

TEST_CASE("total loss of an all-zero score vector is n_raw * log 2") {
  SparseDataset ds;
  ds.add_row({{0, 1.0}}, 1, 4);
  ds.add_row({{1, 1.0}}, 0, 6);
  CHECK(total_loss(ds, {0.0, 0.0}) == doctest::Approx(10.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("total loss rejects dimension mismatches") {
  SparseDataset ds = two_sample_dataset();
  CHECK_THROWS_AS(total_loss(ds, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(gradient_vector(ds, {0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("gradient vector scales components by frequency") {
  SparseDataset ds = two_sample_dataset();
  GradientVector g = gradient_vector(ds, {0.0, 0.0});
  CHECK(g.flavor == GradientFlavor::full);
  CHECK(g.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(g.values[1] == doctest::Approx(1.0).epsilon(1e-12));

  SparseDataset heavy;
  heavy.add_row({{0, 1.0}}, 1, 5);
  GradientVector gh = gradient_vector(heavy, {0.7});
  CHECK(gh.values[0] == doctest::Approx(5.0 * logistic_gradient(1, 0.7)).epsilon(1e-12));
}

TEST_CASE("gradient vector is near zero at a one-sample optimum") {
  // For a lone positive sample the loss floor sits at the clamp; the gradient
  // there is numerically zero.
  SparseDataset ds;
  ds.add_row({{0, 1.0}}, 1);
  GradientVector g = gradient_vector(ds, {20.0});
  CHECK(std::abs(g.values[0]) < 1e-8);
}

TEST_CASE("gradient vector with unit frequencies equals the per-sample map") {
  SplitMix64 rng(5);
  SparseDataset ds;
  for (int i = 0; i < 10; ++i) ds.add_row({{static_cast<std::uint32_t>(i), 1.0}}, i % 2);
  ScoreVector scores;
  for (int i = 0; i < 10; ++i) scores.push_back(4.0 * rng.next_unit() - 2.0);
  GradientVector g = gradient_vector(ds, scores);
  for (int i = 0; i < 10; ++i)
    CHECK(g.values[i] == logistic_gradient(ds.label(i), scores[i]));
}

TEST_CASE("total loss is convex along random segments") {
  SplitMix64 rng(17);
  SparseDataset ds;
  for (int i = 0; i < 8; ++i) ds.add_row({{static_cast<std::uint32_t>(i), 1.0}}, i % 2, 1 + i % 3);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreVector fa(8), fb(8), mid(8);
    for (int i = 0; i < 8; ++i) {
      fa[i] = 8.0 * rng.next_unit() - 4.0;
      fb[i] = 8.0 * rng.next_unit() - 4.0;
      mid[i] = 0.5 * (fa[i] + fb[i]);
    }
    CHECK(total_loss(ds, mid) <= 0.5 * total_loss(ds, fa) + 0.5 * total_loss(ds, fb) + 1e-12);
  }
}
