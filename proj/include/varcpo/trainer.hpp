#ifndef VARCPO_TRAINER_HPP_
#define VARCPO_TRAINER_HPP_

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "varcpo/checkpoint.hpp"
#include "varcpo/config.hpp"
#include "varcpo/estimation.hpp"
#include "varcpo/solver.hpp"

namespace varcpo {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of the metrics log.
struct IterationMetrics {
  int iteration = 0;
  long env_steps = 0;
  double reward_return = 0.0;  ///< mean undiscounted reward per episode
  double mu = 0.0;
  double j_tilde = 0.0;
  double c_offset = 0.0;
  ConstraintMode mode = ConstraintMode::VaR;
  double cost_p95 = 0.0;           ///< over completed episodes, environment cost
  bool cost_p95_reliable = false;  ///< at least 30 completed episodes
  double violation_fraction = 0.0;
  double ice_visitation = 0.0;  ///< ice landings / steps (IcyLake only)
  std::optional<double> wc_bound;
  StepReport step;
};

std::vector<std::string> metrics_columns();
std::string metrics_csv_header();
/// Floats use 9 significant digits; an unavailable bound is an empty field.
std::string metrics_csv_row(const IterationMetrics& m);

/// Nearest-rank empirical quantile. Throws on an empty sample.
double empirical_quantile(std::vector<double> values, double q);

struct RegressionResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool diverged = false;  ///< loss exceeded 10x its initial value; parameters were restored
  std::vector<double> history;
};

/// Full-batch MSE regression of `head` onto `targets` (unscaled units).
RegressionResult regress_critic(ValueHead& head, const Matrix& features, const Vector& targets, double lr,
                                int epochs, CriticOptimizer optimizer);

/// Regresses the three critics onto the batch's return targets.
std::array<RegressionResult, kStreamCount> update_critics(const RolloutBatch& batch,
                                                          const std::array<ValueHead*, kStreamCount>& critics,
                                                          double lr, int epochs, CriticOptimizer optimizer);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const Policy& policy() const { return policy_; }
  Policy& policy() { return policy_; }
  const std::array<ValueHead, kStreamCount>& critics() const { return critics_; }
  int iteration() const { return iteration_; }
  long env_steps() const { return env_steps_; }

  /// Collects config.batch_steps transitions with the current policy.
  RolloutBatch collect();
  /// One full update: collect, estimate, constrain, step, regress critics.
  IterationMetrics iterate();
  /// Runs until total_steps, writing metrics.csv, config.txt, checkpoints
  /// and manifests under out_dir. Progress lines go to `progress` if set.
  std::vector<IterationMetrics> train(std::ostream* progress = nullptr);

  Checkpoint checkpoint() const;
  void write_checkpoint_files(const std::string& stem) const;

 private:
  struct Worker {
    std::unique_ptr<AugmentedEnvironment> env;
    std::mt19937_64 rng;
  };

  void collect_worker(Worker& w, int steps, std::vector<Trajectory>& out) const;
  void dump_state(const std::string& reason) const;

  TrainConfig config_;
  ConstraintSpec spec_;
  GaeConfig gae_;
  Policy policy_;
  std::array<ValueHead, kStreamCount> critics_;
  std::vector<Worker> workers_;
  int iteration_ = 0;
  long env_steps_ = 0;
};

/// Sidecar written next to every checkpoint.
struct Manifest {
  std::uint64_t config_hash = 0;
  int iteration = 0;
  long env_steps = 0;
  TrainConfig config;
};

void save_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

struct EvaluationSummary {
  int episodes = 0;
  double mean_reward = 0.0;
  double mu = 0.0;  ///< mean environment cost return
  double q50 = 0.0;
  double q90 = 0.0;
  double q95 = 0.0;
  double q99 = 0.0;
  double violation_probability = 0.0;  ///< fraction of episodes with C >= rho
  double ci_low = 0.0;                 ///< 95% Wilson interval
  double ci_high = 0.0;
  double success_rate = 0.0;  ///< goal reached (IcyLake) / battery survived the horizon
  double ice_visitation = 0.0;
};

using ActionFn = std::function<Action(const AugmentedState&, std::mt19937_64&)>;

/// Runs `episodes` episodes of `act` on `env`; episodes are seeded from `seed`.
EvaluationSummary evaluate(Environment& env, const ActionFn& act, int episodes, double rho, std::uint64_t seed);

/// Frozen-policy evaluation of the first policy in `ckpt` on the env of
/// `config`. Throws TrainingError on dimension mismatch.
EvaluationSummary evaluate(const Checkpoint& ckpt, const TrainConfig& config, int episodes, std::uint64_t seed,
                           bool greedy = false);

}  // namespace varcpo

#endif  // VARCPO_TRAINER_HPP_
