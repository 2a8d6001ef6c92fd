#ifndef VARCPO_ESTIMATION_HPP_
#define VARCPO_ESTIMATION_HPP_

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "varcpo/policy.hpp"
#include "varcpo/risk.hpp"

namespace varcpo {

enum class Stream { Reward = 0, Cost = 1, AugmentedCost = 2 };
inline constexpr int kStreamCount = 3;
inline constexpr int index_of(Stream s) { return static_cast<int>(s); }

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One episode (or episode prefix cut by the step limit).
struct Trajectory {
  std::vector<Vector> features;  ///< encoded augmented state before each step
  ActionBatch actions;
  std::vector<double> rewards;
  std::vector<double> costs;         ///< cost signal c_t seen by the learner
  std::vector<double> aug_costs;     ///< augmented cost at each step
  std::vector<double> accumulated;   ///< y_t before each step
  std::vector<double> discounts;     ///< gamma_c^t before each step
  std::vector<double> log_probs;     ///< behaviour log-probabilities
  int ice_visits = 0;
  double raw_cost_return = 0.0;  ///< environment cost return, whatever the learner's signal
  bool terminated = false;
  bool truncated = false;
  bool cut = false;  ///< truncated by the batch boundary rather than the step limit
  Vector bootstrap_features;  ///< encoded state after the last step

  std::array<std::vector<double>, kStreamCount> values;
  std::array<std::vector<double>, kStreamCount> advantages;
  std::array<std::vector<double>, kStreamCount> returns;
  std::array<double, kStreamCount> bootstrap_values{};

  std::size_t size() const { return rewards.size(); }
  const std::vector<double>& signal(Stream s) const;
  /// sum_t gamma_c^t c_t.
  double cost_return() const;
  /// sum_t gamma_c^t c~_t.
  double aug_cost_return() const;
  double reward_total() const;
};

struct GaeConfig {
  double lambda = 0.95;
  double reward_discount = 0.99;
  double cost_discount = 1.0;

  void validate() const;
  double discount(Stream s) const { return s == Stream::Reward ? reward_discount : cost_discount; }
};

/// Standard generalized advantage estimation over one trajectory segment.
/// `bootstrap` is V(s_T) for a truncated segment and 0 after termination.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double bootstrap, double discount, double lambda);

class RolloutBatch {
 public:
  std::vector<Trajectory> trajectories;

  std::size_t step_count() const;
  std::size_t completed_episodes() const;
  /// Mean trajectory length (all trajectories).
  double mean_episode_length() const;

  Matrix features() const;
  ActionBatch actions() const;
  Vector log_probs() const;
  Vector advantages(Stream s) const;
  Vector returns(Stream s) const;

  /// Writes `advantages` for stream `s` back into the trajectories in order.
  void set_advantages(Stream s, const Vector& advantages);
};

/// Fills values, advantages and return targets for all three streams.
/// Value heads predict in unscaled units. Terminated trajectories use a zero
/// bootstrap; truncated ones bootstrap from the critics.
void annotate(RolloutBatch& batch, const std::array<const ValueHead*, kStreamCount>& critics, const GaeConfig& gae);

/// Monte-Carlo mean of the cost return and augmented-cost return over
/// terminated episodes. Throws EstimationError when none completed.
MomentEstimates estimate_moments(const RolloutBatch& batch);

/// Reward advantages are standardized to zero mean and unit sample variance;
/// cost-stream advantages are returned unchanged.
Vector advantage_normalize(const Vector& advantages, Stream stream);

}  // namespace varcpo

#endif  // VARCPO_ESTIMATION_HPP_
