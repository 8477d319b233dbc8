#include "asgbdt/theory.hpp"

#include <cmath>
#include <stdexcept>

#include "asgbdt/loss.hpp"
#include "asgbdt/rng.hpp"
#include "asgbdt/tree.hpp"

namespace asgbdt {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
}

void check_common(const TheoryConstants& k) {
  require_positive(k.c, "c");
  require_positive(k.lipschitz, "lipschitz");
  require_positive(k.grad_bound, "grad_bound");
  require_positive(k.omega, "omega");
  require_positive(k.delta_cap, "delta_cap");
  if (k.rho < 0.0 || k.tau < 0.0 || k.zeta < 0.0 || k.delta_leaf < 0.0)
    throw std::invalid_argument("rho, tau, zeta and delta_leaf must be non-negative");
}

}  // namespace

double step_length(const TheoryConstants& k, double epsilon, double theta) {
  check_common(k);
  require_positive(epsilon, "epsilon");
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must be in (0, 1)");
  const double m2 = k.grad_bound * k.grad_bound;
  const double delay = 1.0 + 6.0 * k.rho * k.tau +
                       4.0 * k.rho * k.tau * k.tau * k.omega * std::sqrt(k.delta_cap);
  return k.c * theta * epsilon / (2.0 * k.lipschitz * m2 * k.omega * delay);
}

std::uint64_t iteration_bound(const TheoryConstants& k, double epsilon, double theta, double d0,
                              double log_numerator_l) {
  check_common(k);
  require_positive(epsilon, "epsilon");
  require_positive(d0, "d0");
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must be in (0, 1)");
  const double log_l = log_numerator_l > 0.0 ? log_numerator_l : k.lipschitz;
  const double m2 = k.grad_bound * k.grad_bound;
  const double delay = 1.0 + 6.0 * k.rho * k.tau +
                       6.0 * k.rho * k.tau * k.tau * k.omega * std::sqrt(k.delta_cap) *
                           std::log(log_l * d0 / epsilon);
  const double t = 2.0 * k.lipschitz * m2 * k.omega * delay / (k.c * k.c * theta * epsilon);
  if (!(t < 1e18)) throw std::invalid_argument("iteration bound overflows");
  return t <= 1.0 ? 1 : static_cast<std::uint64_t>(std::ceil(t));
}

StepPlan plan_steps(const TheoryConstants& k, double epsilon, double theta, double d0,
                    double log_numerator_l) {
  StepPlan plan;
  plan.epsilon = epsilon;
  plan.theta = theta;
  plan.d0 = d0;
  plan.step = step_length(k, epsilon, theta);
  plan.updates = iteration_bound(k, epsilon, theta, d0, log_numerator_l);
  return plan;
}

ContractionReport contraction(const TheoryConstants& k, double step) {
  check_common(k);
  require_positive(step, "step");
  const double m = k.grad_bound;
  const double leaf_term = k.delta_leaf * k.lipschitz * k.m_max * std::sqrt(k.zeta);
  ContractionReport rep;
  rep.c1 = 2.0 * leaf_term + k.c * step * k.tau * m;
  rep.c2 = (4.0 * leaf_term + k.c * step * k.tau * m) * k.tau * m +
           2.0 * m * m * (3.0 * k.rho * k.tau + 0.5);
  const double root = std::sqrt(rep.c1 * rep.c1 + 4.0 * k.c * step * rep.c2);
  rep.rate = 1.0 - step * k.c * (1.0 - rep.c1 / (rep.c1 + root));
  const double half = (rep.c1 + root) / (2.0 * k.c);
  rep.diameter = half * half;
  rep.usable = rep.rate < 1.0;
  return rep;
}

double max_workers(double t_build, double t_comm_plus_target) {
  if (!(t_comm_plus_target > 0.0))
    throw std::invalid_argument("communication + target time must be positive");
  if (!(t_build >= 0.0)) throw std::invalid_argument("build time must be non-negative");
  return t_build / t_comm_plus_target;
}

TheoryConstants estimate_constants(const SparseDataset& ds, const FeatureBins& bins,
                                   const SamplingPlan& plan, const Forest& forest,
                                   const TreeParams& tree_params, const EstimateOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("need at least one trial");
  TheoryConstants k;
  k.c = opts.c;
  k.lipschitz = opts.lipschitz;
  k.phi = 2.0;  // |2 (p - y)| <= 2 for p in (0, 1)
  k.m_max = static_cast<double>(ds.max_frequency());

  DiversityStats div =
      estimate_diversity(plan, ds, std::max<std::uint64_t>(opts.trials, 2), hash_key(opts.seed, 0xd1));
  k.omega = static_cast<double>(div.omega);
  k.delta_cap = div.delta;
  k.rho = div.rho;

  const ScoreVector scores = forest.score_vector(ds);
  std::vector<double> grad(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    grad[i] = logistic_gradient(ds.label(i), scores[i]);

  double zeta_max = 0.0;
  double leaf_dist_max = 0.0;
  double m_norm_max = 0.0;
  for (std::uint64_t t = 0; t < opts.trials; ++t) {
    SampleDraw d = draw(plan, ds, opts.seed, t);
    GradientVector target = weighted_target(d, ds, scores);
    DatasetView view = DatasetView::from_support(ds, bins, d.support);
    RegressionTree tree = fit_tree(view, target, d.weights, tree_params);
    LeafPartition part = leaf_partition(tree, ds);

    zeta_max = std::max(
        zeta_max, static_cast<double>(zeta_estimate(part, grad, d.weights, opts.zeta_tol)));
    leaf_dist_max = std::max(leaf_dist_max, max_intra_leaf_distance(part, ds));

    // Applied-update magnitude: leaf means of the per-sample gradient,
    // frequency-scaled, restricted to the draw support.
    std::vector<double> proj = project(part, grad, d.weights);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
      if (!d.support[i]) continue;
      double u = static_cast<double>(ds.frequency(i)) * proj[i];
      norm2 += u * u;
    }
    m_norm_max = std::max(m_norm_max, std::sqrt(norm2));
  }
  k.zeta = zeta_max;
  k.delta_leaf = leaf_dist_max;
  k.grad_bound = m_norm_max;
  return k;
}

double estimate_projected_rho(const SparseDataset& ds, const FeatureBins& bins,
                              const SamplingPlan& plan, const Forest& forest,
                              const TreeParams& tree_params, std::uint64_t trials,
                              std::uint64_t seed, double tol) {
  if (trials < 2) throw std::invalid_argument("need at least two trials");
  const ScoreVector scores = forest.score_vector(ds);
  std::vector<double> grad(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    grad[i] = logistic_gradient(ds.label(i), scores[i]);

  auto projected_update = [&](std::uint64_t index) {
    SampleDraw d = draw(plan, ds, seed, index);
    GradientVector target = weighted_target(d, ds, scores);
    DatasetView view = DatasetView::from_support(ds, bins, d.support);
    RegressionTree tree = fit_tree(view, target, d.weights, tree_params);
    LeafPartition part = leaf_partition(tree, ds);
    std::vector<double> proj = project(part, grad, d.weights);
    for (std::size_t i = 0; i < proj.size(); ++i)
      proj[i] = d.support[i] ? static_cast<double>(ds.frequency(i)) * proj[i] : 0.0;
    return proj;
  };

  std::vector<double> prev = projected_update(0);
  std::uint64_t nonzero = 0;
  for (std::uint64_t t = 1; t < trials; ++t) {
    std::vector<double> cur = projected_update(t);
    double dot = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) dot += prev[i] * cur[i];
    if (std::abs(dot) > tol) ++nonzero;
    prev = std::move(cur);
  }
  return static_cast<double>(nonzero) / static_cast<double>(trials - 1);
}

}  // namespace asgbdt
