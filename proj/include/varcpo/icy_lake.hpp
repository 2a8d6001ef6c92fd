#ifndef VARCPO_ICY_LAKE_HPP_
#define VARCPO_ICY_LAKE_HPP_

#include <array>
#include <string>
#include <vector>

#include "varcpo/cmdp.hpp"

namespace varcpo {

enum class Tile { Start, Goal, DeepSnow, Ice };

/// 4x4 gridworld tile map and cost structure.
///
/// Deep snow costs a constant `snow_cost`. Ice costs `ice_base_cost` plus,
/// with probability `slip_prob`, an extra `slip_cost`. Costs are charged on
/// the tile the agent lands on (bumping into an edge lands on the current
/// tile again). Movement is deterministic.
struct IcyLakeConfig {
  /// Rows top to bottom; 'S' start, 'G' goal, 'D' deep snow, 'I' ice.
  std::array<std::string, 4> rows{"SIII", "DIII", "DIII", "DDDG"};
  double snow_cost = 2.0;
  double ice_base_cost = 0.5;
  double slip_cost = 10.0;
  double slip_prob = 0.1;
  double goal_reward = 1.0;
  double goal_cost = 0.0;
  double reward_discount = 0.99;
  double cost_discount = 1.0;
  int max_episode_steps = 100;

  void validate() const;
  double expected_ice_cost() const { return ice_base_cost + slip_prob * slip_cost; }
};

class IcyLake final : public Environment {
 public:
  enum Move { Left = 0, Down = 1, Right = 2, Up = 3 };
  static constexpr int kSide = 4;
  static constexpr int kCells = kSide * kSide;

  explicit IcyLake(IcyLakeConfig config = {});

  const CmdpSpec& spec() const override { return spec_; }
  std::string name() const override { return "icylake"; }
  std::unique_ptr<Environment> clone() const override;

  const IcyLakeConfig& config() const { return config_; }
  Tile tile(int cell) const { return tiles_[cell]; }
  int position() const { return pos_; }
  int start_cell() const { return start_; }
  /// Tile the agent landed on in the most recent step.
  Tile last_tile() const { return tiles_[pos_]; }
  bool last_slipped() const { return slipped_; }

  static int cell(int row, int col) { return row * kSide + col; }
  /// Deterministic successor of `cell` under `move`, clipped at the edges.
  static int successor(int cell, int move);

 protected:
  Vector do_reset() override;
  StepOutcome do_step(const Action& action) override;

 private:
  Vector observe() const;

  IcyLakeConfig config_;
  CmdpSpec spec_;
  std::array<Tile, kCells> tiles_{};
  int start_ = 0;
  int pos_ = 0;
  bool slipped_ = false;
};

}  // namespace varcpo

#endif  // VARCPO_ICY_LAKE_HPP_
