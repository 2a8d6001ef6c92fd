#ifndef VARCPO_CMDP_HPP_
#define VARCPO_CMDP_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Core>

namespace varcpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct CategoricalSpace {
  int n = 2;
};

struct BoxSpace {
  int dim = 1;
  double low = -1.0;
  double high = 1.0;
};

using ActionSpace = std::variant<CategoricalSpace, BoxSpace>;

/// Static description of a constrained MDP.
struct CmdpSpec {
  int observation_dim = 1;
  ActionSpace action_space = CategoricalSpace{};
  double reward_discount = 0.99;
  double cost_discount = 1.0;
  int max_episode_steps = 100;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
  bool discrete() const { return std::holds_alternative<CategoricalSpace>(action_space); }
  /// Number of logits (categorical) or action dimensions (box).
  int action_dim() const;
};

/// A discrete action carries `index`; a continuous one carries `values`.
struct Action {
  int index = -1;
  Vector values;

  static Action discrete(int i) { return Action{i, {}}; }
  static Action continuous(Vector v) { return Action{-1, std::move(v)}; }
};

struct StepOutcome {
  Vector next_observation;
  double reward = 0.0;
  double cost = 0.0;
  bool terminated = false;
  bool truncated = false;

  bool done() const { return terminated || truncated; }
};

/// Environment observation extended with the accumulated discounted cost
/// y_t and the current cost discount gamma_c^t.
struct AugmentedState {
  Vector base_observation;
  double accumulated_cost = 0.0;
  double discount = 1.0;
};

/// y' = y + discount * c, discount' = gamma_c * discount.
AugmentedState augment(const StepOutcome& outcome, const AugmentedState& prev, double cost_discount);

/// Thrown when an episode is stepped after it has finished, or an action is
/// not valid for the action space.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Base class of the shipped environments. Each instance owns its RNG
/// stream; instances must not be shared across threads.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const CmdpSpec& spec() const = 0;
  virtual std::string name() const = 0;

  /// Reseeds the RNG stream and returns the initial observation.
  Vector reset(std::uint64_t seed);
  /// Starts a new episode on the current RNG stream.
  Vector reset();
  StepOutcome step(const Action& action);

  int elapsed_steps() const { return steps_; }
  bool finished() const { return finished_; }

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual Vector do_reset() = 0;
  /// Environment-specific transition. Truncation by the step limit is
  /// applied by the caller.
  virtual StepOutcome do_step(const Action& action) = 0;

  std::mt19937_64 rng_{0};

 private:
  void check_action(const Action& action) const;

  int steps_ = 0;
  bool finished_ = true;
};

/// Wraps an environment and maintains the augmented state across steps.
class AugmentedEnvironment {
 public:
  explicit AugmentedEnvironment(std::unique_ptr<Environment> env);

  const CmdpSpec& spec() const { return env_->spec(); }
  Environment& base() { return *env_; }
  const Environment& base() const { return *env_; }

  const AugmentedState& reset(std::uint64_t seed);
  const AugmentedState& reset();

  struct Transition {
    StepOutcome outcome;
    AugmentedState state;  ///< state before the step
    AugmentedState next;   ///< state after the step
  };
  Transition step(const Action& action);

  const AugmentedState& state() const { return state_; }

 private:
  std::unique_ptr<Environment> env_;
  AugmentedState state_;
};

}  // namespace varcpo

#endif  // VARCPO_CMDP_HPP_
