#ifndef VARCPO_CONFIG_HPP_
#define VARCPO_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcpo/battery.hpp"
#include "varcpo/estimation.hpp"
#include "varcpo/icy_lake.hpp"
#include "varcpo/risk.hpp"
#include "varcpo/solver.hpp"

namespace varcpo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text; `#` starts a comment. Keys are dotted
/// (env.*, constraint.*, solver.*, ...).
std::map<std::string, std::string> parse_key_values(const std::string& text);

enum class CostSignal { Raw, Exceedance };
enum class Objective { Reward, Cost };
enum class CriticOptimizer { Sgd, Adam };

struct TrainConfig {
  std::string env = "icylake";
  IcyLakeConfig icy;
  BatteryConfig battery;

  ConstraintMode algorithm = ConstraintMode::VaR;
  Objective objective = Objective::Reward;
  double rho = 15.0;
  double epsilon = 0.05;
  double cost_limit = 15.0;
  CostSignal cost_signal = CostSignal::Raw;

  int batch_steps = 4000;
  long total_steps = 1'000'000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir = "runs/default";
  int checkpoint_every = 25;
  std::string init_checkpoint;

  double gae_lambda = 0.95;
  SolverSettings solver;

  double critic_lr = 1e-3;
  int critic_epochs = 80;
  CriticOptimizer critic_optimizer = CriticOptimizer::Sgd;

  std::vector<int> hidden{64, 64};
  double log_std_init = -0.5;
  double log_std_min = -5.0;
  double log_std_max = 1.0;

  /// Throws ConfigError naming every offending key.
  void validate() const;

  /// Canonical text form; parsing it yields an identical config.
  std::string to_text() const;
  /// 64-bit FNV-1a hash of to_text().
  std::uint64_t hash() const;

  static TrainConfig from_text(const std::string& text);
  static TrainConfig from_file(const std::filesystem::path& path);

  ConstraintSpec constraint_spec() const;
  std::unique_ptr<Environment> make_environment() const;
  double reward_discount() const;
  double cost_discount() const;
};

}  // namespace varcpo

#endif  // VARCPO_CONFIG_HPP_
