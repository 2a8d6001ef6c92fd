#include "varcpo/battery.hpp"

#include <algorithm>
#include <stdexcept>

namespace varcpo {

void BatteryConfig::validate() const {
  if (!(capacity > 0.0)) throw std::invalid_argument("battery capacity must be positive");
  if (!(drag >= 0.0 && drag <= 1.0)) throw std::invalid_argument("battery drag must lie in [0,1]");
}

BatteryToy::BatteryToy(BatteryConfig config) : config_(config) {
  config_.validate();
  spec_.observation_dim = 3;
  spec_.action_space = BoxSpace{1, -1.0, 1.0};
  spec_.reward_discount = config_.reward_discount;
  spec_.cost_discount = config_.cost_discount;
  spec_.max_episode_steps = config_.max_episode_steps;
  spec_.validate();
  battery_ = config_.capacity;
}

std::unique_ptr<Environment> BatteryToy::clone() const { return std::make_unique<BatteryToy>(config_); }

Vector BatteryToy::observe() const {
  Vector obs(3);
  obs << velocity_, battery_ / config_.capacity, static_cast<double>(t_) / config_.max_episode_steps;
  return obs;
}

Vector BatteryToy::do_reset() {
  battery_ = config_.capacity;
  velocity_ = 0.0;
  t_ = 0;
  return observe();
}

StepOutcome BatteryToy::do_step(const Action& action) {
  const double thrust = std::clamp(action.values[0], -1.0, 1.0);
  velocity_ = (1.0 - config_.drag) * velocity_ + thrust;
  ++t_;

  StepOutcome out;
  out.reward = velocity_;
  out.cost = 0.5 * thrust * thrust;
  battery_ -= out.cost;
  out.terminated = battery_ <= 0.0 || t_ >= config_.max_episode_steps;
  out.next_observation = observe();
  return out;
}

}  // namespace varcpo
