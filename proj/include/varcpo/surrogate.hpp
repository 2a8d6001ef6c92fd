#ifndef VARCPO_SURROGATE_HPP_
#define VARCPO_SURROGATE_HPP_

#include "varcpo/estimation.hpp"
#include "varcpo/policy.hpp"
#include "varcpo/risk.hpp"
#include "varcpo/solver.hpp"

namespace varcpo {

/// Everything the local objective and constraint surrogates need, frozen at
/// the current policy theta_k.
struct SurrogateContext {
  Matrix features;
  ActionBatch actions;
  Vector old_log_probs;
  Vector reward_advantages;  ///< standardized
  Vector cost_advantages;
  Vector aug_advantages;
  ConstraintSpec spec{1.0, 0.5};
  ConstraintMode mode = ConstraintMode::VaR;  ///< resolved mode for this update
  MomentEstimates moments;
  double horizon = 1.0;     ///< stands in for 1 / (1 - gamma_c)
  double cost_limit = 0.0;  ///< expected-cost limit d

  /// Builds the context from an annotated batch.
  static SurrogateContext from_batch(const RolloutBatch& batch, const ConstraintSpec& spec, ConstraintMode mode,
                                     const MomentEstimates& moments, double cost_discount, double cost_limit);

  Eigen::Index size() const { return features.cols(); }
};

/// Resolves the configured algorithm mode into the mode used this iteration:
/// VaR switches to Recovery whenever mu >= rho.
ConstraintMode resolve_mode(ConstraintMode configured, double mu, const ConstraintSpec& spec);

/// g: gradient of the reward surrogate at theta_k.
Vector objective_gradient(const SurrogateContext& ctx, const Policy& policy);

struct ConstraintTerms {
  Vector b;
  double c = 0.0;
};

/// b and c for the resolved mode.
///  VaR:           b = grad L_C~ - (2 mu_k / eps) grad L_mu-term, c = J_C~ - d(mu_k)
///  Recovery:      b = grad L_mu,  c = mu_k - rho
///  ExpectedCost:  b = grad L_mu,  c = mu_k - d
///  Unconstrained: b = 0,          c = -inf
ConstraintTerms assemble_constraint_gradient(const SurrogateContext& ctx, const Policy& policy);

/// Evaluates KL, objective change and constraint surrogate at `trial`,
/// including the quadratic term of the linearized bound.
TrialEvaluation evaluate_trial(const SurrogateContext& ctx, const Policy& old_policy, Policy& trial,
                               const Vector& theta, double c);

}  // namespace varcpo

#endif  // VARCPO_SURROGATE_HPP_
