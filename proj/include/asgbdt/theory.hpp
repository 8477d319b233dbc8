#pragma once

#include <cstdint>

#include "asgbdt/dataset.hpp"
#include "asgbdt/sampler.hpp"
#include "asgbdt/trainer.hpp"

namespace asgbdt {

/// Inputs to the convergence calculators. c and lipschitz are model
/// assumptions supplied by the caller (defaults of 1.0 carry a documented
/// caveat in the CLI); the rest can be estimated from data.
struct TheoryConstants {
  double c = 1.0;          // strong-convexity modulus of the total loss
  double lipschitz = 1.0;  // gradient Lipschitz constant of the per-sample loss
  double grad_bound = 1.0; // M: bound on the applied update vector norm
  double omega = 1.0;      // max distinct samples per draw
  double delta_cap = 1.0;  // max per-sample inclusion probability
  double rho = 1.0;        // draw-intersection probability
  double zeta = 0.0;       // tree tortuosity: residual components after projection
  double tau = 0.0;        // staleness bound
  double delta_leaf = 0.0; // max intra-leaf sample distance
  double m_max = 1.0;      // max sample frequency
  double phi = 2.0;        // per-sample gradient bound
};

/// Delay-adjusted step length:
/// v = c * theta * eps / (2 * lip * M^2 * omega * (1 + 6*rho*tau + 4*rho*tau^2*omega*sqrt(delta)))
double step_length(const TheoryConstants& k, double epsilon, double theta);

/// Smallest update count t with
/// t >= 2 * lip * M^2 * omega * (1 + 6*rho*tau + 6*rho*tau^2*omega*sqrt(delta)*log(L*D0/eps))
///      / (c^2 * theta * eps).
/// The log multiplies only the tau^2 term, and its numerator constant L is
/// configurable (defaults to the Lipschitz constant).
std::uint64_t iteration_bound(const TheoryConstants& k, double epsilon, double theta, double d0,
                              double log_numerator_l = -1.0);

/// Bundle of a suboptimality target with the step length and update count
/// the calculators prescribe for it.
struct StepPlan {
  double epsilon = 0.0;
  double theta = 0.0;
  double d0 = 0.0;
  double step = 0.0;          // v
  std::uint64_t updates = 0;  // t
};

StepPlan plan_steps(const TheoryConstants& k, double epsilon, double theta, double d0,
                    double log_numerator_l = -1.0);

/// Per-update geometric contraction toward a fixed-point neighbourhood.
struct ContractionReport {
  double c1 = 0.0;
  double c2 = 0.0;
  double rate = 0.0;      // r; usable only when r < 1
  double diameter = 0.0;  // squared distance of the fixed point
  bool usable = false;
};

ContractionReport contraction(const TheoryConstants& k, double step);

/// Worker-count ceiling: build time over (communication + target) time.
double max_workers(double t_build, double t_comm_plus_target);

struct EstimateOptions {
  std::uint64_t trials = 16;
  std::uint64_t seed = 1;
  double c = 1.0;
  double lipschitz = 1.0;
  double zeta_tol = 1e-9;
};

/// Measure omega/delta/rho from the sampling plan and zeta/delta_leaf/M from
/// trees fit to sampled targets at the forest's current scores. tau is left
/// at zero; callers set it from the worker schedule they care about.
TheoryConstants estimate_constants(const SparseDataset& ds, const FeatureBins& bins,
                                   const SamplingPlan& plan, const Forest& forest,
                                   const TreeParams& tree_params, const EstimateOptions& opts);

/// Alternative intersection estimate over leaf-projected update vectors:
/// the fraction of consecutive draw pairs whose projected, support-masked
/// gradient vectors have a nonzero inner product. Coincides with the
/// support-intersection rho when trees are fine enough.
double estimate_projected_rho(const SparseDataset& ds, const FeatureBins& bins,
                              const SamplingPlan& plan, const Forest& forest,
                              const TreeParams& tree_params, std::uint64_t trials,
                              std::uint64_t seed, double tol = 1e-12);

}  // namespace asgbdt
