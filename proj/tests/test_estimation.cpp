#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "varcpo/cmdp.hpp"
#include "varcpo/estimation.hpp"
#include "varcpo/icy_lake.hpp"

using namespace varcpo;

namespace {

// Sum over k-step estimators weighted (1 - lambda) lambda^(k-1), with the
// remaining weight on the longest one.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v, double boot, double g,
                               double lam) {
  const std::size_t n = r.size();
  std::vector<double> out(n);
  auto value_at = [&](std::size_t i) { return i < n ? v[i] : boot; };
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t horizon = n - t;
    double total = 0.0;
    for (std::size_t k = 1; k <= horizon; ++k) {
      double est = 0.0;
      for (std::size_t l = 0; l < k; ++l) est += std::pow(g, static_cast<double>(l)) * r[t + l];
      est += std::pow(g, static_cast<double>(k)) * value_at(t + k) - v[t];
      const double w = k < horizon ? (1 - lam) * std::pow(lam, static_cast<double>(k - 1))
                                   : std::pow(lam, static_cast<double>(horizon - 1));
      total += w * est;
    }
    out[t] = total;
  }
  return out;
}

ValueHead constant_head(double value) {
  ValueHead h(Architecture{1, {}, 1});
  Vector p = Vector::Zero(h.parameter_count());
  p[1] = value;
  h.set_parameters(p);
  return h;
}

Trajectory make_traj(const std::vector<double>& costs, bool terminated, double gc = 1.0) {
  Trajectory t;
  double d = 1.0;
  for (double c : costs) {
    t.features.push_back(Vector::Ones(1));
    t.actions.push_back(Action::discrete(0));
    t.rewards.push_back(0.0);
    t.costs.push_back(c);
    t.aug_costs.push_back(2 * c);
    t.discounts.push_back(d);
    t.log_probs.push_back(0.0);
    d *= gc;
  }
  t.terminated = terminated;
  t.truncated = !terminated;
  t.bootstrap_features = Vector::Ones(1);
  return t;
}

}  // namespace

TEST_CASE("GAE examples") {
  const std::vector<double> r1{1.0}, v1{0.0};
  for (double lam : {0.0, 0.5, 1.0})
    CHECK(compute_gae(r1, v1, 0.0, 0.9, lam)[0] == doctest::Approx(1.0));

  const std::vector<double> r{1.0, 2.0, 3.0}, z{0.0, 0.0, 0.0};
  const auto mc = compute_gae(r, z, 0.0, 1.0, 1.0);
  CHECK(mc[0] == doctest::Approx(6.0));
  CHECK(mc[1] == doctest::Approx(5.0));
  CHECK(mc[2] == doctest::Approx(3.0));

  const std::vector<double> r2{1.0, 1.0}, v2{0.5, 0.5};
  const auto a = compute_gae(r2, v2, 0.0, 0.9, 0.8);
  CHECK(a[0] == doctest::Approx(1.31));
  CHECK(a[1] == doctest::Approx(0.5));
  const auto o = gae_oracle(r2, v2, 0.0, 0.9, 0.8);
  CHECK(o[0] == doctest::Approx(1.31));

  CHECK_THROWS_AS(compute_gae(r2, v1, 0.0, 0.9, 0.8), std::invalid_argument);
}

TEST_CASE("GAE matches the k-step oracle and the lambda=1 return") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> r(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = g(rng);
      v[i] = g(rng);
    }
    const double boot = t % 2 ? g(rng) : 0.0;
    const double gamma = u(rng), lam = u(rng);
    const auto got = compute_gae(r, v, boot, gamma, lam);
    const auto want = gae_oracle(r, v, boot, gamma, lam);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);

    const auto one = compute_gae(r, v, boot, gamma, 1.0);
    double ret = boot;
    for (std::size_t i = n; i-- > 0;) {
      ret = r[i] + gamma * ret;
      CHECK(std::abs(one[i] - (ret - v[i])) < 1e-8);
    }
  }
}

TEST_CASE("moment estimates") {
  RolloutBatch zero;
  zero.trajectories.push_back(make_traj({0.0, 0.0}, true));
  CHECK(estimate_moments(zero).mu == 0.0);
  CHECK(estimate_moments(zero).j_tilde == 0.0);

  RolloutBatch b;
  b.trajectories.push_back(make_traj({1.0, 1.0}, true));
  b.trajectories.push_back(make_traj({4.0}, true));
  b.trajectories.push_back(make_traj({100.0}, false));  // truncated: excluded
  const MomentEstimates m = estimate_moments(b);
  CHECK(m.mu == doctest::Approx(3.0));
  CHECK(m.j_tilde == doctest::Approx(6.0));
  CHECK(m.sample_count == 2);
  CHECK(b.completed_episodes() == 2);
  CHECK(b.step_count() == 4);
  CHECK(b.mean_episode_length() == doctest::Approx(4.0 / 3.0));

  RolloutBatch none;
  none.trajectories.push_back(make_traj({1.0}, false));
  CHECK_THROWS_AS(estimate_moments(none), EstimationError);
}

TEST_CASE("IcyLake fixed-policy cost mean matches enumeration") {
  // Right x3 then Down x3 on the default map: five ice tiles then the goal.
  const int moves[6] = {IcyLake::Right, IcyLake::Right, IcyLake::Right, IcyLake::Down, IcyLake::Down, IcyLake::Down};
  AugmentedEnvironment env(std::make_unique<IcyLake>());
  env.reset(77);
  const ConstraintSpec spec(15, 0.05);
  RolloutBatch batch;
  const int n = 4000;
  for (int e = 0; e < n; ++e) {
    env.reset();
    Trajectory t;
    for (int m : moves) {
      const auto tr = env.step(Action::discrete(m));
      t.costs.push_back(tr.outcome.cost);
      t.discounts.push_back(tr.state.discount);
      t.aug_costs.push_back(augmented_cost(tr.outcome.cost, tr.state.accumulated_cost, tr.state.discount, spec));
      t.rewards.push_back(tr.outcome.reward);
    }
    t.terminated = true;
    // Final y agrees with the per-step sum.
    CHECK(std::abs(env.state().accumulated_cost - t.cost_return()) < 1e-9);
    batch.trajectories.push_back(std::move(t));
  }
  const MomentEstimates m = estimate_moments(batch);
  const double exact = 5 * 1.5;
  const double se = std::sqrt(5 * 0.09 * 100.0 / n);
  CHECK(std::abs(m.mu - exact) < 3 * se);
  // Per trajectory the augmented return is beta C^2 + 2 rho C.
  double direct = 0.0;
  for (const auto& t : batch.trajectories) {
    const double c = t.cost_return();
    direct += spec.beta() * c * c + 2 * spec.rho() * c;
  }
  CHECK(std::abs(m.j_tilde - direct / n) < 1e-9 * direct / n);
}

TEST_CASE("advantage normalization") {
  const Vector constant = Vector::Constant(10, 3.0);
  CHECK(advantage_normalize(constant, Stream::Reward).norm() == 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(2.0, 5.0);
  Vector a(200);
  for (auto& x : a) x = g(rng);
  const Vector z = advantage_normalize(a, Stream::Reward);
  CHECK(std::abs(z.mean()) < 1e-12);
  const double var = (z.array() - z.mean()).square().sum() / (z.size() - 1);
  CHECK(std::abs(var - 1.0) < 1e-6);
  CHECK(advantage_normalize(a, Stream::Cost) == a);
  CHECK(advantage_normalize(a, Stream::AugmentedCost).mean() == a.mean());
}

TEST_CASE("annotate bootstraps truncated segments only") {
  RolloutBatch b;
  b.trajectories.push_back(make_traj({1.0, 2.0}, true));
  b.trajectories.push_back(make_traj({3.0, 0.5}, false));
  const ValueHead vr = constant_head(0.0), vc = constant_head(1.5), va = constant_head(-2.0);
  GaeConfig gae{0.9, 0.99, 0.95};
  annotate(b, {&vr, &vc, &va}, gae);

  const auto& term = b.trajectories[0];
  CHECK(term.bootstrap_values[index_of(Stream::Cost)] == 0.0);
  const auto want0 = gae_oracle({1.0, 2.0}, {1.5, 1.5}, 0.0, 0.95, 0.9);
  CHECK(term.advantages[1][0] == doctest::Approx(want0[0]));

  const auto& trunc = b.trajectories[1];
  CHECK(trunc.bootstrap_values[index_of(Stream::Cost)] == 1.5);
  const auto want1 = gae_oracle({3.0, 0.5}, {1.5, 1.5}, 1.5, 0.95, 0.9);
  CHECK(trunc.advantages[1][0] == doctest::Approx(want1[0]));
  CHECK(trunc.advantages[1][1] == doctest::Approx(want1[1]));
  CHECK(trunc.returns[1][1] == doctest::Approx(want1[1] + 1.5));
  const auto want_aug = gae_oracle({6.0, 1.0}, {-2.0, -2.0}, -2.0, 0.95, 0.9);
  CHECK(trunc.advantages[2][0] == doctest::Approx(want_aug[0]));
  CHECK(b.advantages(Stream::Cost).size() == 4);

  Vector replaced = Vector::LinSpaced(4, 0.0, 3.0);
  b.set_advantages(Stream::Reward, replaced);
  CHECK(b.advantages(Stream::Reward) == replaced);
  CHECK_THROWS_AS(b.set_advantages(Stream::Reward, Vector::Zero(3)), std::invalid_argument);

  GaeConfig bad{1.5, 0.99, 1.0};
  CHECK_THROWS_AS(annotate(b, {&vr, &vc, &va}, bad), std::invalid_argument);
}

TEST_CASE("advantages of the behaviour policy average to zero in every stream") {
  // One-step episodes from a two-action policy with exact critics.
  const ConstraintSpec spec(15, 0.05);
  const double p_a = 0.3;
  // action 0: r = 1, c in {0, 4} each w.p. 1/2; action 1: r = 0, c = 1.
  const double er = p_a * 1.0;
  const double ec = p_a * 2.0 + (1 - p_a) * 1.0;
  const double ea = p_a * 0.5 * augmented_cost(4.0, 0.0, 1.0, spec) + (1 - p_a) * augmented_cost(1.0, 0.0, 1.0, spec);
  const ValueHead vr = constant_head(er), vc = constant_head(ec), va = constant_head(ea);

  std::mt19937_64 rng(17);
  std::bernoulli_distribution pick(p_a), coin(0.5);
  RolloutBatch b;
  for (int i = 0; i < 20000; ++i) {
    const bool a0 = pick(rng);
    const double c = a0 ? (coin(rng) ? 4.0 : 0.0) : 1.0;
    Trajectory t = make_traj({c}, true);
    t.rewards[0] = a0 ? 1.0 : 0.0;
    t.aug_costs[0] = augmented_cost(c, 0.0, 1.0, spec);
    b.trajectories.push_back(std::move(t));
  }
  annotate(b, {&vr, &vc, &va}, GaeConfig{0.95, 0.99, 1.0});
  for (Stream s : {Stream::Reward, Stream::Cost, Stream::AugmentedCost}) {
    const Vector a = b.advantages(s);
    const double mean = a.mean();
    const double sd = std::sqrt((a.array() - mean).square().sum() / (a.size() - 1));
    CHECK(std::abs(mean) < 3 * sd / std::sqrt(static_cast<double>(a.size())));
  }
}
