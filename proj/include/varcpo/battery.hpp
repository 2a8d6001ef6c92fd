#ifndef VARCPO_BATTERY_HPP_
#define VARCPO_BATTERY_HPP_

#include "varcpo/cmdp.hpp"

namespace varcpo {

/// One-dimensional double integrator driven on a finite battery.
///
/// velocity' = (1 - drag) * velocity + thrust, reward = velocity',
/// cost = 0.5 * thrust^2 drained from the battery. An empty battery ends
/// the episode; so does reaching `max_episode_steps`, since elapsed time is
/// part of the observation. Thrust is clipped to [-1, 1] before use.
struct BatteryConfig {
  double capacity = 10.0;
  double drag = 0.5;
  double reward_discount = 0.99;
  double cost_discount = 1.0;
  int max_episode_steps = 50;

  void validate() const;
};

class BatteryToy final : public Environment {
 public:
  explicit BatteryToy(BatteryConfig config = {});

  const CmdpSpec& spec() const override { return spec_; }
  std::string name() const override { return "battery"; }
  std::unique_ptr<Environment> clone() const override;

  const BatteryConfig& config() const { return config_; }
  double battery() const { return battery_; }
  double velocity() const { return velocity_; }

 protected:
  Vector do_reset() override;
  StepOutcome do_step(const Action& action) override;

 private:
  Vector observe() const;

  BatteryConfig config_;
  CmdpSpec spec_;
  double battery_ = 0.0;
  double velocity_ = 0.0;
  int t_ = 0;
};

}  // namespace varcpo

#endif  // VARCPO_BATTERY_HPP_
