#include "varcpo/icy_lake.hpp"

#include <stdexcept>

namespace varcpo {

namespace {

Tile parse_tile(char c) {
  switch (c) {
    case 'S': return Tile::Start;
    case 'G': return Tile::Goal;
    case 'D': return Tile::DeepSnow;
    case 'I': return Tile::Ice;
    default: throw std::invalid_argument(std::string("unknown IcyLake tile '") + c + "'");
  }
}

}  // namespace

void IcyLakeConfig::validate() const {
  int starts = 0;
  int goals = 0;
  for (const auto& row : rows) {
    if (row.size() != 4) throw std::invalid_argument("IcyLake rows must have 4 tiles");
    for (char c : row) {
      const Tile t = parse_tile(c);
      starts += t == Tile::Start;
      goals += t == Tile::Goal;
    }
  }
  if (starts != 1 || goals != 1) throw std::invalid_argument("IcyLake map needs exactly one S and one G");
  if (!(slip_prob >= 0.0 && slip_prob <= 1.0)) throw std::invalid_argument("slip_prob must lie in [0,1]");
  if (snow_cost < 0.0 || ice_base_cost < 0.0 || slip_cost < 0.0 || goal_cost < 0.0)
    throw std::invalid_argument("IcyLake costs must be non-negative");
}

IcyLake::IcyLake(IcyLakeConfig config) : config_(std::move(config)) {
  config_.validate();
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      tiles_[cell(r, c)] = parse_tile(config_.rows[r][c]);
      if (tiles_[cell(r, c)] == Tile::Start) start_ = cell(r, c);
    }
  }
  spec_.observation_dim = kCells;
  spec_.action_space = CategoricalSpace{4};
  spec_.reward_discount = config_.reward_discount;
  spec_.cost_discount = config_.cost_discount;
  spec_.max_episode_steps = config_.max_episode_steps;
  spec_.validate();
  pos_ = start_;
}

std::unique_ptr<Environment> IcyLake::clone() const { return std::make_unique<IcyLake>(config_); }

int IcyLake::successor(int cell, int move) {
  int r = cell / kSide;
  int c = cell % kSide;
  switch (move) {
    case Left: c = c > 0 ? c - 1 : c; break;
    case Down: r = r < kSide - 1 ? r + 1 : r; break;
    case Right: c = c < kSide - 1 ? c + 1 : c; break;
    case Up: r = r > 0 ? r - 1 : r; break;
    default: throw ContractViolation("IcyLake move out of range");
  }
  return IcyLake::cell(r, c);
}

Vector IcyLake::observe() const {
  Vector obs = Vector::Zero(kCells);
  obs[pos_] = 1.0;
  return obs;
}

Vector IcyLake::do_reset() {
  pos_ = start_;
  slipped_ = false;
  return observe();
}

StepOutcome IcyLake::do_step(const Action& action) {
  pos_ = successor(pos_, action.index);
  slipped_ = false;

  StepOutcome out;
  switch (tiles_[pos_]) {
    case Tile::Start: break;
    case Tile::DeepSnow: out.cost = config_.snow_cost; break;
    case Tile::Ice: {
      out.cost = config_.ice_base_cost;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng_) < config_.slip_prob) {
        slipped_ = true;
        out.cost += config_.slip_cost;
      }
      break;
    }
    case Tile::Goal:
      out.cost = config_.goal_cost;
      out.reward = config_.goal_reward;
      out.terminated = true;
      break;
  }
  out.next_observation = observe();
  return out;
}

}  // namespace varcpo
