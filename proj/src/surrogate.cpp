#include "varcpo/surrogate.hpp"

#include <cmath>
#include <limits>

namespace varcpo {

SurrogateContext SurrogateContext::from_batch(const RolloutBatch& batch, const ConstraintSpec& spec,
                                              ConstraintMode mode, const MomentEstimates& moments,
                                              double cost_discount, double cost_limit) {
  SurrogateContext ctx;
  ctx.features = batch.features();
  ctx.actions = batch.actions();
  ctx.old_log_probs = batch.log_probs();
  ctx.reward_advantages = advantage_normalize(batch.advantages(Stream::Reward), Stream::Reward);
  ctx.cost_advantages = advantage_normalize(batch.advantages(Stream::Cost), Stream::Cost);
  ctx.aug_advantages = advantage_normalize(batch.advantages(Stream::AugmentedCost), Stream::AugmentedCost);
  ctx.spec = spec;
  ctx.mode = mode;
  ctx.moments = moments;
  ctx.horizon = horizon_factor(cost_discount, batch.mean_episode_length());
  ctx.cost_limit = cost_limit;
  return ctx;
}

ConstraintMode resolve_mode(ConstraintMode configured, double mu, const ConstraintSpec& spec) {
  if (configured == ConstraintMode::VaR && recovery_needed(mu, spec)) return ConstraintMode::Recovery;
  return configured;
}

Vector objective_gradient(const SurrogateContext& ctx, const Policy& policy) {
  const double inv_n = 1.0 / static_cast<double>(ctx.size());
  return policy.weighted_log_prob_grad(ctx.features, ctx.actions, ctx.reward_advantages * inv_n);
}

ConstraintTerms assemble_constraint_gradient(const SurrogateContext& ctx, const Policy& policy) {
  ConstraintTerms out;
  const double inv_n = 1.0 / static_cast<double>(ctx.size());
  switch (ctx.mode) {
    case ConstraintMode::Unconstrained:
      out.b = Vector::Zero(policy.parameter_count());
      out.c = -std::numeric_limits<double>::infinity();
      return out;
    case ConstraintMode::Recovery:
    case ConstraintMode::ExpectedCost:
      out.b = policy.weighted_log_prob_grad(ctx.features, ctx.actions, ctx.cost_advantages * (ctx.horizon * inv_n));
      out.c = ctx.moments.mu - (ctx.mode == ConstraintMode::Recovery ? ctx.spec.rho() : ctx.cost_limit);
      return out;
    case ConstraintMode::VaR: {
      const double coeff = dhat_linear_coeff(ctx.moments.mu, ctx.spec, ctx.horizon);
      const Vector weights = (ctx.horizon * ctx.aug_advantages - coeff * ctx.cost_advantages) * inv_n;
      out.b = policy.weighted_log_prob_grad(ctx.features, ctx.actions, weights);
      out.c = constraint_eval(ctx.moments, ctx.spec).c_offset;
      return out;
    }
  }
  return out;
}

TrialEvaluation evaluate_trial(const SurrogateContext& ctx, const Policy& old_policy, Policy& trial,
                               const Vector& theta, double c) {
  trial.set_parameters(theta);
  TrialEvaluation e;
  e.kl = trial.mean_kl(old_policy, ctx.features);
  const Vector ratio_m1 = ((trial.log_probs(ctx.features, ctx.actions) - ctx.old_log_probs).array().exp() - 1.0).matrix();
  const double inv_n = 1.0 / static_cast<double>(ctx.size());
  e.objective_change = ratio_m1.dot(ctx.reward_advantages) * inv_n;
  const double z = ratio_m1.dot(ctx.cost_advantages) * inv_n;
  switch (ctx.mode) {
    case ConstraintMode::Unconstrained:
      e.constraint_value = c;
      break;
    case ConstraintMode::Recovery:
    case ConstraintMode::ExpectedCost:
      e.constraint_value = c + ctx.horizon * z;
      break;
    case ConstraintMode::VaR: {
      const double z_aug = ratio_m1.dot(ctx.aug_advantages) * inv_n;
      e.constraint_value = c + ctx.horizon * z_aug - dhat_change(z, ctx.moments.mu, ctx.spec, ctx.horizon);
      break;
    }
  }
  return e;
}

}  // namespace varcpo
