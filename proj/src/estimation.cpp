#include "varcpo/estimation.hpp"

#include <cmath>

namespace varcpo {

const std::vector<double>& Trajectory::signal(Stream s) const {
  switch (s) {
    case Stream::Reward: return rewards;
    case Stream::Cost: return costs;
    case Stream::AugmentedCost: return aug_costs;
  }
  return rewards;
}

double Trajectory::cost_return() const {
  double total = 0.0;
  for (std::size_t t = 0; t < costs.size(); ++t) total += discounts[t] * costs[t];
  return total;
}

double Trajectory::aug_cost_return() const {
  double total = 0.0;
  for (std::size_t t = 0; t < aug_costs.size(); ++t) total += discounts[t] * aug_costs[t];
  return total;
}

double Trajectory::reward_total() const {
  double total = 0.0;
  for (double r : rewards) total += r;
  return total;
}

void GaeConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("GAE lambda must lie in [0,1]");
  if (!(reward_discount >= 0.0 && reward_discount <= 1.0) || !(cost_discount >= 0.0 && cost_discount <= 1.0))
    throw std::invalid_argument("GAE discounts must lie in [0,1]");
}

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double bootstrap, double discount, double lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("compute_gae: rewards and values differ in length");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  double next_value = bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    const double delta = rewards[i] + discount * next_value - values[i];
    running = delta + discount * lambda * running;
    adv[i] = running;
    next_value = values[i];
  }
  return adv;
}

std::size_t RolloutBatch::step_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::size_t RolloutBatch::completed_episodes() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.terminated;
  return n;
}

double RolloutBatch::mean_episode_length() const {
  if (trajectories.empty()) return 0.0;
  return static_cast<double>(step_count()) / static_cast<double>(trajectories.size());
}

Matrix RolloutBatch::features() const {
  const auto n = static_cast<Eigen::Index>(step_count());
  if (n == 0) return {};
  Matrix x(trajectories.front().features.front().size(), n);
  Eigen::Index col = 0;
  for (const auto& t : trajectories)
    for (const auto& f : t.features) x.col(col++) = f;
  return x;
}

ActionBatch RolloutBatch::actions() const {
  ActionBatch out;
  if (trajectories.empty()) return out;
  if (!trajectories.front().actions.indices.empty()) {
    for (const auto& t : trajectories)
      out.indices.insert(out.indices.end(), t.actions.indices.begin(), t.actions.indices.end());
    return out;
  }
  const auto n = static_cast<Eigen::Index>(step_count());
  out.values.resize(trajectories.front().actions.values.rows(), n);
  Eigen::Index col = 0;
  for (const auto& t : trajectories) {
    out.values.middleCols(col, t.actions.values.cols()) = t.actions.values;
    col += t.actions.values.cols();
  }
  return out;
}

namespace {

template <typename Get>
Vector flatten(const std::vector<Trajectory>& trajs, std::size_t n, Get get) {
  Vector v(static_cast<Eigen::Index>(n));
  Eigen::Index i = 0;
  for (const auto& t : trajs)
    for (double x : get(t)) v[i++] = x;
  return v;
}

}  // namespace

Vector RolloutBatch::log_probs() const {
  return flatten(trajectories, step_count(), [](const Trajectory& t) -> const auto& { return t.log_probs; });
}

Vector RolloutBatch::advantages(Stream s) const {
  return flatten(trajectories, step_count(),
                 [s](const Trajectory& t) -> const auto& { return t.advantages[index_of(s)]; });
}

Vector RolloutBatch::returns(Stream s) const {
  return flatten(trajectories, step_count(), [s](const Trajectory& t) -> const auto& { return t.returns[index_of(s)]; });
}

void RolloutBatch::set_advantages(Stream s, const Vector& advantages) {
  if (advantages.size() != static_cast<Eigen::Index>(step_count()))
    throw std::invalid_argument("advantage vector does not match batch size");
  Eigen::Index i = 0;
  for (auto& t : trajectories)
    for (auto& a : t.advantages[index_of(s)]) a = advantages[i++];
}

void annotate(RolloutBatch& batch, const std::array<const ValueHead*, kStreamCount>& critics, const GaeConfig& gae) {
  gae.validate();
  for (auto& traj : batch.trajectories) {
    if (traj.size() == 0) continue;
    Matrix x(traj.features.front().size(), static_cast<Eigen::Index>(traj.size()));
    for (std::size_t t = 0; t < traj.size(); ++t) x.col(static_cast<Eigen::Index>(t)) = traj.features[t];
    for (int k = 0; k < kStreamCount; ++k) {
      const auto stream = static_cast<Stream>(k);
      const Vector v = critics[k]->values(x);
      traj.values[k].assign(v.data(), v.data() + v.size());
      traj.bootstrap_values[k] = traj.terminated ? 0.0 : critics[k]->value(traj.bootstrap_features);
      traj.advantages[k] =
          compute_gae(traj.signal(stream), traj.values[k], traj.bootstrap_values[k], gae.discount(stream), gae.lambda);
      traj.returns[k].resize(traj.size());
      for (std::size_t t = 0; t < traj.size(); ++t) traj.returns[k][t] = traj.advantages[k][t] + traj.values[k][t];
    }
  }
}

MomentEstimates estimate_moments(const RolloutBatch& batch) {
  MomentEstimates m;
  int count = 0;
  double mu = 0.0;
  double jt = 0.0;
  for (const auto& t : batch.trajectories) {
    if (!t.terminated) continue;
    ++count;
    mu += t.cost_return();
    jt += t.aug_cost_return();
  }
  if (count == 0) throw EstimationError("batch contains no completed episode; cannot estimate cost moments");
  m.mu = mu / count;
  m.j_tilde = jt / count;
  m.sample_count = count;
  return m;
}

Vector advantage_normalize(const Vector& advantages, Stream stream) {
  if (stream != Stream::Reward || advantages.size() == 0) return advantages;
  const double mean = advantages.mean();
  const Vector centered = advantages.array() - mean;
  const double denom = std::max<double>(1.0, static_cast<double>(advantages.size() - 1));
  const double sd = std::sqrt(centered.squaredNorm() / denom);
  if (!(sd > 1e-12)) return Vector::Zero(advantages.size());
  return centered / sd;
}

}  // namespace varcpo
