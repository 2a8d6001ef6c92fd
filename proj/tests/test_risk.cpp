#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "varcpo/risk.hpp"
#include "varcpo/selftest.hpp"

using namespace varcpo;

namespace {

// Direct Chebyshev form written out independently of the library.
double cheb(double mu, double sigma2, double rho, double eps) {
  return (1.0 / eps - 1.0) * sigma2 - (rho - mu) * (rho - mu);
}

}  // namespace

TEST_CASE("chebyshev_lhs examples") {
  CHECK(chebyshev_lhs(0.0, 0.0, ConstraintSpec(15, 0.05)) == doctest::Approx(-225.0));
  CHECK(chebyshev_lhs(100.0, 0.0, ConstraintSpec(100, 0.05)) == 0.0);
  CHECK(chebyshev_lhs(5.0, 1.0, ConstraintSpec(15, 0.05)) == doctest::Approx(-81.0));
}

TEST_CASE("augmented_cost examples") {
  const ConstraintSpec s(15, 0.05);
  CHECK(augmented_cost(0.0, 3.0, 0.7, s) == 0.0);
  CHECK(augmented_cost(2.0, 0.0, 1.0, s) == doctest::Approx(136.0));
  CHECK(augmented_cost(2.0, 1.0, 0.5, s) == doctest::Approx(174.0));
}

TEST_CASE("d_bound and constraint_eval examples") {
  CHECK(d_bound(0.0, ConstraintSpec(15, 0.05)) == doctest::Approx(225.0));
  CHECK(d_bound(3.0, ConstraintSpec(15, 0.05)) == doctest::Approx(405.0));
  CHECK(d_bound(10.0, ConstraintSpec(100, 0.05)) == doctest::Approx(12000.0));

  const ConstraintSpec s(15, 0.05);
  ConstraintEval e = constraint_eval({0.0, 100.0, 10}, s);
  CHECK(e.c_offset == doctest::Approx(-125.0));
  CHECK(e.d_value == doctest::Approx(225.0));
  CHECK(e.feasible);
  e = constraint_eval({3.0, d_bound(3.0, s), 10}, s);
  CHECK(e.c_offset == 0.0);
  CHECK(e.feasible);
  e = constraint_eval({3.0, 406.0, 10}, s);
  CHECK_FALSE(e.feasible);
}

TEST_CASE("recovery predicate") {
  const ConstraintSpec s(15, 0.05);
  CHECK_FALSE(recovery_needed(14.9, s));
  CHECK(recovery_needed(15.0, s));
  CHECK(recovery_needed(50.0, s));
}

TEST_CASE("bound linearization coefficient") {
  const ConstraintSpec s(15, 0.05);
  CHECK(dhat_linear_coeff(0.0, s, 1.0) == 0.0);
  CHECK(dhat_linear_coeff(3.0, s, 1.0) == doctest::Approx(120.0));
  CHECK(horizon_factor(0.9, 123.0) == doctest::Approx(10.0));
  CHECK(horizon_factor(1.0, 7.5) == 7.5);
  CHECK_THROWS_AS(horizon_factor(1.0, 0.0), std::invalid_argument);
  // d(mu_k + H z) - d(mu_k) for the quadratic d.
  const double mu = 3.0, z = 0.2, h = 4.0;
  CHECK(dhat_change(z, mu, s, h) == doctest::Approx(d_bound(mu + h * z, s) - d_bound(mu, s)));
}

TEST_CASE("worst-case bound") {
  CHECK(*worst_case_bound(0.0, 0.0, 2.0, 0.01, 0.9, 0.05) == 0.0);
  const double k = std::sqrt(0.02) * 0.9 / 0.01;
  CHECK(k == doctest::Approx(12.7279).epsilon(1e-5));
  CHECK(*worst_case_bound(1.0, 0.1, 2.0, 0.01, 0.9, 0.05) == doctest::Approx(k * 13.0));
  CHECK(*worst_case_bound(1.0, 0.1, 2.0, 0.01, 0.9, 0.05) == doctest::Approx(165.463).epsilon(1e-5));
  CHECK_FALSE(worst_case_bound(1.0, 0.1, 2.0, 0.01, 1.0, 0.05).has_value());

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), ac = u(rng), mu = 5 * u(rng), d = 0.05 * u(rng) + 1e-4;
    const double gc = 0.5 + 0.2 * u(rng), eps = 0.01 + 0.2 * u(rng);
    const double base = *worst_case_bound(a, ac, mu, d, gc, eps);
    CHECK(*worst_case_bound(a + 0.1, ac, mu, d, gc, eps) >= base);
    CHECK(*worst_case_bound(a, ac + 0.1, mu, d, gc, eps) >= base);
    CHECK(*worst_case_bound(a, ac, mu + 0.1, d, gc, eps) >= base);
    CHECK(*worst_case_bound(a, ac, mu, d + 0.01, gc, eps) >= base);
  }
}

TEST_CASE("beta is stored to machine precision") {
  for (double eps : {0.01, 0.05, 0.1, 0.2, 0.3333, 0.5, 0.99}) CHECK(ConstraintSpec(1, eps).beta() == 1.0 / eps - 1.0);
  CHECK_THROWS_AS(ConstraintSpec(0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintSpec(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintSpec(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("square-return decomposition") {
  const std::vector<double> a{1.0, 2.0};
  const auto r = square_return_decomposition(a, 0.5);
  CHECK(r.lhs == doctest::Approx(4.0));
  CHECK(r.rhs == doctest::Approx(4.0));
  const std::vector<double> z{0.0, 0.0, 0.0};
  const auto r0 = square_return_decomposition(z, 0.9);
  CHECK(r0.lhs == 0.0);
  CHECK(r0.rhs == 0.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> c(static_cast<std::size_t>(rng() % 50));
    for (auto& x : c) x = 20.0 * u(rng);
    const double g = i % 5 == 0 ? 1.0 : u(rng);
    double s = 0.0, d = 1.0;
    for (double x : c) {
      s += d * x;
      d *= g;
    }
    const auto check = square_return_decomposition(c, g);
    CHECK(std::abs(check.rhs - s * s) < 1e-9 * (1.0 + s * s));
  }
}

TEST_CASE("augmented return minus bound equals the quadratic form on enumerated distributions") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double g = trial % 2 ? 1.0 : 0.6 + 0.4 * u(rng);
    const double eps = 0.02 + 0.4 * u(rng);
    const int k = 1 + static_cast<int>(rng() % 5);
    std::vector<std::vector<double>> traj(k);
    std::vector<double> p(k);
    double ps = 0.0;
    for (int j = 0; j < k; ++j) {
      traj[j].resize(1 + rng() % 6);
      for (auto& c : traj[j]) c = 5.0 * u(rng);
      p[j] = u(rng) + 0.01;
      ps += p[j];
    }
    double m = 0.0, m2 = 0.0;
    std::vector<double> ret(k);
    for (int j = 0; j < k; ++j) {
      p[j] /= ps;
      double s = 0.0, d = 1.0;
      for (double c : traj[j]) {
        s += d * c;
        d *= g;
      }
      ret[j] = s;
      m += p[j] * s;
      m2 += p[j] * s * s;
    }
    double var = 0.0;
    for (int j = 0; j < k; ++j) var += p[j] * (ret[j] - m) * (ret[j] - m);
    const double rho = m + 1.0 + 10.0 * u(rng);
    const ConstraintSpec spec(rho, eps);
    double jt = 0.0;
    for (int j = 0; j < k; ++j) {
      double y = 0.0, d = 1.0, a = 0.0;
      for (double c : traj[j]) {
        a += d * augmented_cost(c, y, d, spec);
        y += d * c;
        d *= g;
      }
      jt += p[j] * a;
    }
    const double ref = cheb(m, var, rho, eps);
    const double got = constraint_eval({m, jt, 1}, spec).c_offset;
    CHECK(std::abs(got - ref) < 1e-9 * (1.0 + std::abs(ref)));
  }
}

TEST_CASE("sampled constraint offset matches the quadratic form within Monte-Carlo error") {
  // Two-step episodes: c0 in {0, 3}, c1 in {1, 6}, independent.
  const double rho = 15.0, eps = 0.1, beta = 1.0 / eps - 1.0;
  const ConstraintSpec spec(rho, eps);
  const double p0 = 0.3, p1 = 0.2;
  // Exact moments of C = c0 + c1.
  const double m = p0 * 3 + (1 - p1) * 1 + p1 * 6;
  const double var = p0 * (1 - p0) * 9 + p1 * (1 - p1) * 25;
  const double truth = cheb(m, var, rho, eps);

  std::mt19937_64 rng(8);
  std::bernoulli_distribution b0(p0), b1(p1);
  const int n = 20000;
  std::vector<double> c(n);
  double jt = 0.0, mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c0 = b0(rng) ? 3.0 : 0.0;
    const double c1 = b1(rng) ? 6.0 : 1.0;
    jt += augmented_cost(c0, 0.0, 1.0, spec) + augmented_cost(c1, c0, 1.0, spec);
    c[i] = c0 + c1;
    mean += c[i];
  }
  jt /= n;
  mean /= n;
  const double est = constraint_eval({mean, jt, n}, spec).c_offset;
  // Influence function of beta*m2 - (beta+1) m^2 + 2 rho m - rho^2.
  double m2 = 0.0;
  for (double x : c) m2 += x * x;
  m2 /= n;
  const double dm = -2.0 * (beta + 1.0) * mean + 2.0 * rho;
  double ss = 0.0;
  for (double x : c) {
    const double inf = beta * (x * x - m2) + dm * (x - mean);
    ss += inf * inf;
  }
  const double se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(est - truth) < 3.0 * se);
}

TEST_CASE("chebyshev feasibility certifies the tail bound on random distributions") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int tested = 0;
  while (tested < 1000) {
    const double rho = 1.0 + 50.0 * u(rng);
    const double eps = 0.01 + 0.6 * u(rng);
    const int n = 2 + static_cast<int>(rng() % 8);
    std::vector<double> v(n), p(n);
    double ps = 0.0;
    for (int j = 0; j < n; ++j) {
      v[j] = 2.0 * rho * u(rng);
      p[j] = u(rng) + 1e-3;
      ps += p[j];
    }
    double m = 0.0;
    for (int j = 0; j < n; ++j) m += (p[j] /= ps) * v[j];
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += p[j] * (v[j] - m) * (v[j] - m);
    // Rescale around a mean below rho so the surrogate is satisfied.
    const double target = rho * u(rng);
    const double smax = (rho - target) / std::sqrt((1.0 / eps - 1.0) * var);
    const double s = smax * (tested % 3 == 0 ? 1.0 : u(rng));
    double m1 = 0.0, q = 0.0;
    for (int j = 0; j < n; ++j) {
      v[j] = target + s * (v[j] - m);
      m1 += p[j] * v[j];
    }
    for (int j = 0; j < n; ++j) q += p[j] * (v[j] - m1) * (v[j] - m1);
    if (!(m1 < rho) || chebyshev_lhs(m1, q, ConstraintSpec(rho, eps)) > 0.0) continue;
    double tail = 0.0;
    for (int j = 0; j < n; ++j)
      if (v[j] >= rho) tail += p[j];
    CHECK(tail <= eps + 1e-12);
    ++tested;
  }
}

TEST_CASE("self-test suites pass and the perturbed beta fails the identity") {
  const auto ok = run_selftest();
  REQUIRE(ok.size() == 3);
  for (const auto& r : ok) CHECK_MESSAGE(r.passed(), r.name);
  SelftestOptions bad;
  bad.beta_perturbation = 0.5;
  const auto res = run_selftest(bad);
  CHECK(res[0].passed());
  CHECK_FALSE(res[1].passed());
}
