#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "varcpo/solver.hpp"

using namespace varcpo;

namespace {

using Matrix = Eigen::MatrixXd;

Matrix random_spd(int n, std::mt19937_64& rng, double floor = 0.2) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = g(rng);
  return a * a.transpose() + floor * Matrix::Identity(n, n);
}

LinearOperator op(const Matrix& h) {
  return [h](const Vector& v) -> Vector { return h * v; };
}

SolverSettings exact_settings() {
  SolverSettings s;
  s.cg_iters = 50;
  s.cg_tol = 1e-13;
  return s;
}

struct GridResult {
  bool feasible = false;
  double best = -std::numeric_limits<double>::infinity();
};

// Dense search over the trust-region ellipse. A linear objective attains its
// maximum on the boundary of the feasible set, so the grid covers the
// ellipse boundary and the chord cut out by the linear constraint.
GridResult grid_search(const Matrix& h, const Vector& g, const Vector& b, double c, double delta) {
  const Eigen::LLT<Matrix> llt(h);
  const Matrix l_inv_t = llt.matrixU().solve(Matrix::Identity(2, 2));  // x = U^-1 z, z on the disk
  const double radius = std::sqrt(2.0 * delta);
  GridResult out;
  auto consider = [&](const Vector& x) {
    if (c + b.dot(x) <= 1e-12) {
      out.feasible = true;
      out.best = std::max(out.best, g.dot(x));
    }
  };
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    consider(l_inv_t * (radius * Vector{{std::cos(t), std::sin(t)}}));
  }
  // Chord: c + b^T x = 0 inside the ellipse, parameterized in z-space.
  const Vector bz = l_inv_t.transpose() * b;
  const double nb = bz.norm();
  if (nb > 0.0) {
    const Vector z0 = -c * bz / (nb * nb);
    const Vector dir{{-bz[1] / nb, bz[0] / nb}};
    const double rem = radius * radius - z0.squaredNorm();
    if (rem >= 0.0) {
      const double half = std::sqrt(rem);
      for (int k = 0; k <= n; ++k) {
        const double s = -half + 2.0 * half * k / n;
        const Vector x = l_inv_t * (z0 + s * dir);
        out.feasible = true;
        out.best = std::max(out.best, g.dot(x));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("conjugate gradient cases") {
  const Vector rhs{{3.0, -1.0, 2.0}};
  const auto id = conjugate_gradient([](const Vector& v) { return v; }, rhs, 10, 1e-10);
  CHECK((id.x - rhs).norm() < 1e-12);
  CHECK(id.converged);

  const Matrix d = Vector{{2.0, 2.0}}.asDiagonal();
  const auto r = conjugate_gradient(op(d), Vector{{4.0, 2.0}}, 10, 1e-12);
  CHECK(r.x[0] == doctest::Approx(2.0));
  CHECK(r.x[1] == doctest::Approx(1.0));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Matrix h = random_spd(10, rng, 1.0);
    Vector b(10);
    for (auto& x : b) x = g(rng);
    const auto sol = conjugate_gradient(op(h), b, 50, 1e-12);
    CHECK((h * sol.x - b).norm() / b.norm() < 1e-6);
    CHECK(sol.residual < 1e-6);
    CHECK((sol.x - h.ldlt().solve(b)).norm() < 1e-6 * (1.0 + sol.x.norm()));
  }

  const auto zero = conjugate_gradient(op(d), Vector::Zero(2), 5, 1e-10);
  CHECK(zero.x.norm() == 0.0);
  CHECK_THROWS_AS(conjugate_gradient([](const Vector& v) { return Vector(v * std::nan("")); }, rhs, 5, 1e-10),
                  SolverError);
  CHECK_THROWS_AS(conjugate_gradient(op(-Matrix::Identity(3, 3)), rhs, 5, 1e-10), SolverError);
}

TEST_CASE("two-constraint example lies on both boundaries") {
  StepProblem p{Vector{{1.0, 0.0}}, Vector{{0.0, 1.0}}, 0.1, 0.5, op(Matrix::Identity(2, 2))};
  const auto sol = solve_step(p, exact_settings());
  CHECK(sol.report.dual_case == DualCase::Constrained);
  CHECK(sol.direction[1] == doctest::Approx(-0.1));
  CHECK(sol.direction[0] == doctest::Approx(std::sqrt(0.99)));
  const auto grid = grid_search(Matrix::Identity(2, 2), p.g, p.b, p.c, p.delta);
  CHECK(std::abs(grid.best - p.g.dot(sol.direction)) < 1e-3);
}

TEST_CASE("solve_step agrees with a dense grid search on random 2-D problems") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int feasible = 0, infeasible = 0;
  for (int t = 0; t < 100; ++t) {
    const Matrix h = random_spd(2, rng);
    const Vector gv{{g(rng), g(rng)}};
    const Vector bv{{g(rng), g(rng)}};
    const double delta = 0.01 + 0.5 * u(rng);
    const double c = 0.6 * g(rng);
    const auto sol = solve_step({gv, bv, c, delta, op(h)}, exact_settings());
    const auto grid = grid_search(h, gv, bv, c, delta);
    const Vector x = sol.direction;
    if (grid.feasible) {
      ++feasible;
      CHECK(sol.report.dual_case != DualCase::InfeasibleRecovery);
      CHECK(0.5 * x.dot(h * x) <= delta * (1 + 1e-9));
      CHECK(c + bv.dot(x) <= 1e-9);
      CHECK(std::abs(gv.dot(x) - grid.best) < 1e-3 * std::max(1.0, std::abs(grid.best)));
    } else {
      ++infeasible;
      CHECK(sol.report.dual_case == DualCase::InfeasibleRecovery);
      const Vector w = h.ldlt().solve(bv);
      const Vector want = -std::sqrt(2 * delta / bv.dot(w)) * w;
      CHECK((x - want).norm() < 1e-8);
      CHECK(bv.dot(x) < 0.0);
    }
  }
  CHECK(feasible > 50);
  CHECK(infeasible > 0);
}

TEST_CASE("inactive constraint reduces to the plain trust-region step") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Matrix h = random_spd(5, rng);
    Vector gv(5), bv(5);
    for (int i = 0; i < 5; ++i) {
      gv[i] = g(rng);
      bv[i] = 0.01 * g(rng);
    }
    const auto sol = solve_step({gv, bv, -10.0, 0.01, op(h)}, exact_settings());
    CHECK(sol.report.dual_case == DualCase::Unconstrained);
    const Vector hg = h.ldlt().solve(gv);
    const double cosang = sol.direction.dot(hg) / (sol.direction.norm() * hg.norm());
    CHECK(std::acos(std::min(1.0, cosang)) < 1e-6);
    CHECK(0.5 * sol.direction.dot(h * sol.direction) == doctest::Approx(0.01));
  }
  // No constraint at all (b = 0, c = -inf).
  const Matrix h = random_spd(3, rng);
  const Vector gv{{1.0, 2.0, 3.0}};
  const auto sol = solve_step({gv, Vector::Zero(3), -std::numeric_limits<double>::infinity(), 0.02, op(h)},
                              exact_settings());
  CHECK(sol.report.dual_case == DualCase::Unconstrained);
  CHECK(0.5 * sol.direction.dot(h * sol.direction) == doctest::Approx(0.02));
}

TEST_CASE("degenerate and infeasible cases") {
  const Matrix h = Vector{{2.0, 1.0}}.asDiagonal();
  // g = 0 with a violated but reachable constraint: move along -H^-1 b.
  auto sol = solve_step({Vector::Zero(2), Vector{{1.0, 1.0}}, 0.05, 0.5, op(h)}, exact_settings());
  const Vector w = h.ldlt().solve(Vector{{1.0, 1.0}});
  CHECK(std::abs(sol.direction.normalized().dot(-w.normalized()) - 1.0) < 1e-9);
  CHECK(0.05 + Vector{{1.0, 1.0}}.dot(sol.direction) <= 1e-9);

  // Constraint cannot be met within the ball.
  sol = solve_step({Vector{{1.0, 0.0}}, Vector{{0.0, 1.0}}, 5.0, 0.01, op(h)}, exact_settings());
  CHECK(sol.report.dual_case == DualCase::InfeasibleRecovery);
  CHECK(sol.direction[1] < 0.0);
  CHECK(sol.report.constraint_after < sol.report.constraint_before);

  // Violated constraint with a flat gradient cannot be resolved.
  sol = solve_step({Vector{{1.0, 0.0}}, Vector::Zero(2), 1.0, 0.01, op(h)}, exact_settings());
  CHECK(sol.report.dual_case == DualCase::Unresolvable);
  CHECK(sol.direction.norm() == 0.0);
  // Flat gradient with a satisfied constraint degrades to the unconstrained step.
  sol = solve_step({Vector{{1.0, 0.0}}, Vector::Zero(2), -1.0, 0.01, op(h)}, exact_settings());
  CHECK(sol.report.dual_case == DualCase::Unconstrained);
  CHECK(sol.direction.norm() > 0.0);

  CHECK_THROWS_AS(solve_step({Vector::Zero(2), Vector::Zero(3), 0.0, 0.01, op(h)}, exact_settings()),
                  std::invalid_argument);
}

TEST_CASE("line search") {
  SolverSettings s;
  s.delta = 0.01;
  // Quadratic toy: KL = 0.5 |theta - theta_k|^2, objective = sum(theta - theta_k).
  const Vector theta_k = Vector::Zero(2);
  auto eval = [&](const Vector& th) {
    TrialEvaluation e;
    e.kl = 0.5 * (th - theta_k).squaredNorm();
    e.objective_change = (th - theta_k).sum();
    e.constraint_value = -1.0;
    return e;
  };

  auto r = line_search(theta_k, Vector::Zero(2), DualCase::Unconstrained, -1.0, eval, s);
  CHECK(r.accepted);
  CHECK(r.backtracks == 0);
  CHECK(r.theta == theta_k);

  // |d|^2 / 2 = 0.0125 > delta at full step, 0.008 after one backtrack.
  const Vector d = Vector::Constant(2, std::sqrt(0.0125));
  r = line_search(theta_k, d, DualCase::Unconstrained, -1.0, eval, s);
  CHECK(r.accepted);
  CHECK(r.backtracks == 1);
  CHECK((r.theta - 0.8 * d).norm() < 1e-15);
  CHECK(r.evaluation.kl <= s.delta);

  r = line_search(theta_k, Vector::Constant(2, 10.0), DualCase::Unconstrained, -1.0, eval, s);
  CHECK_FALSE(r.accepted);
  CHECK(r.backtracks == s.max_backtracks);
  CHECK(r.theta == theta_k);

  // Objective decrease is rejected unless recovering.
  const Vector down = Vector::Constant(2, -0.01);
  CHECK_FALSE(line_search(theta_k, down, DualCase::Constrained, -1.0, eval, s).accepted);
  CHECK(line_search(theta_k, down, DualCase::InfeasibleRecovery, -1.0, eval, s).accepted);

  // A constraint surrogate above max(c, 0) is rejected.
  auto worse = [&](const Vector& th) {
    TrialEvaluation e = eval(th);
    e.constraint_value = 0.5;
    return e;
  };
  CHECK_FALSE(line_search(theta_k, Vector::Constant(2, 0.01), DualCase::Constrained, 0.1, worse, s).accepted);
  CHECK(line_search(theta_k, Vector::Constant(2, 0.01), DualCase::Constrained, 0.6, worse, s).accepted);
}

TEST_CASE("solver settings validation") {
  SolverSettings s;
  CHECK_NOTHROW(s.validate());
  s.backtrack = 1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SolverSettings{};
  s.delta = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
