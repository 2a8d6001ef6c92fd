#include "varcpo/cmdp.hpp"

#include <cmath>

namespace varcpo {

void CmdpSpec::validate() const {
  if (observation_dim < 1) throw std::invalid_argument("observation_dim must be positive");
  if (!(reward_discount >= 0.0 && reward_discount <= 1.0))
    throw std::invalid_argument("reward discount must lie in [0,1]");
  if (!(cost_discount >= 0.0 && cost_discount <= 1.0))
    throw std::invalid_argument("cost discount must lie in [0,1]");
  if (max_episode_steps < 1) throw std::invalid_argument("max_episode_steps must be >= 1");
  if (const auto* cat = std::get_if<CategoricalSpace>(&action_space)) {
    if (cat->n < 2) throw std::invalid_argument("categorical action space needs n >= 2");
  } else {
    const auto& box = std::get<BoxSpace>(action_space);
    if (box.dim < 1 || !(box.low < box.high)) throw std::invalid_argument("malformed box action space");
  }
}

int CmdpSpec::action_dim() const {
  if (const auto* cat = std::get_if<CategoricalSpace>(&action_space)) return cat->n;
  return std::get<BoxSpace>(action_space).dim;
}

AugmentedState augment(const StepOutcome& outcome, const AugmentedState& prev, double cost_discount) {
  AugmentedState next;
  next.base_observation = outcome.next_observation;
  next.accumulated_cost = prev.accumulated_cost + prev.discount * outcome.cost;
  next.discount = cost_discount * prev.discount;
  return next;
}

Vector Environment::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return reset();
}

Vector Environment::reset() {
  steps_ = 0;
  finished_ = false;
  return do_reset();
}

void Environment::check_action(const Action& action) const {
  const auto& space = spec().action_space;
  if (const auto* cat = std::get_if<CategoricalSpace>(&space)) {
    if (action.index < 0 || action.index >= cat->n)
      throw ContractViolation("action index " + std::to_string(action.index) + " outside categorical space");
  } else {
    const auto& box = std::get<BoxSpace>(space);
    if (action.values.size() != box.dim) throw ContractViolation("continuous action has wrong dimension");
    if (!action.values.allFinite()) throw ContractViolation("continuous action is not finite");
  }
}

StepOutcome Environment::step(const Action& action) {
  if (finished_) throw ContractViolation("step() called on a finished episode; call reset() first");
  check_action(action);
  StepOutcome out = do_step(action);
  ++steps_;
  if (!out.terminated && steps_ >= spec().max_episode_steps) out.truncated = true;
  finished_ = out.done();
  return out;
}

AugmentedEnvironment::AugmentedEnvironment(std::unique_ptr<Environment> env) : env_(std::move(env)) {
  if (!env_) throw std::invalid_argument("AugmentedEnvironment requires an environment");
}

const AugmentedState& AugmentedEnvironment::reset(std::uint64_t seed) {
  state_ = AugmentedState{env_->reset(seed), 0.0, 1.0};
  return state_;
}

const AugmentedState& AugmentedEnvironment::reset() {
  state_ = AugmentedState{env_->reset(), 0.0, 1.0};
  return state_;
}

AugmentedEnvironment::Transition AugmentedEnvironment::step(const Action& action) {
  Transition tr;
  tr.state = state_;
  tr.outcome = env_->step(action);
  tr.next = augment(tr.outcome, state_, env_->spec().cost_discount);
  state_ = tr.next;
  return tr;
}

}  // namespace varcpo
