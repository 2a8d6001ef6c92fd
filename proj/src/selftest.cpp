#include "varcpo/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "varcpo/risk.hpp"

namespace varcpo {

namespace {

SuiteResult square_return_suite(const SelftestOptions& opt, std::mt19937_64& rng) {
  SuiteResult r{"square-return decomposition"};
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  std::uniform_real_distribution<double> gamma(0.0, 1.0);
  for (int i = 0; i < opt.sequences; ++i) {
    std::vector<double> costs(static_cast<std::size_t>(len(rng)));
    for (auto& c : costs) c = cost(rng);
    const double g = i % 4 == 0 ? 1.0 : gamma(rng);
    // Independent oracle: square the discounted sum directly.
    double total = 0.0;
    double disc = 1.0;
    for (double c : costs) {
      total += disc * c;
      disc *= g;
    }
    const double direct = total * total;
    const auto check = square_return_decomposition(costs, g);
    const double err = std::abs(direct - check.rhs) / (1.0 + std::abs(direct));
    r.worst = std::max(r.worst, err);
    ++r.cases;
    if (!(err < 1e-9) || std::abs(check.lhs - direct) > 1e-9 * (1.0 + direct)) ++r.failures;
  }
  return r;
}

SuiteResult augmented_identity_suite(const SelftestOptions& opt, std::mt19937_64& rng) {
  SuiteResult r{"augmented-cost identity"};
  std::uniform_int_distribution<int> n_traj(1, 6);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_real_distribution<double> cost(0.0, 4.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < opt.distributions; ++i) {
    const double g = i % 3 == 0 ? 1.0 : 0.5 + 0.5 * unit(rng);
    const double eps = 0.01 + 0.5 * unit(rng);
    const int k = n_traj(rng);
    std::vector<std::vector<double>> trajs(static_cast<std::size_t>(k));
    std::vector<double> prob(static_cast<std::size_t>(k));
    double psum = 0.0;
    for (int j = 0; j < k; ++j) {
      trajs[j].resize(static_cast<std::size_t>(len(rng)));
      for (auto& c : trajs[j]) c = unit(rng) < 0.3 ? 0.0 : cost(rng);
      prob[j] = 0.05 + unit(rng);
      psum += prob[j];
    }
    double mu = 0.0;
    double mu2 = 0.0;
    for (int j = 0; j < k; ++j) {
      prob[j] /= psum;
      double total = 0.0;
      double disc = 1.0;
      for (double c : trajs[j]) {
        total += disc * c;
        disc *= g;
      }
      mu += prob[j] * total;
      mu2 += prob[j] * total * total;
    }
    const double rho = mu + 0.5 + 10.0 * unit(rng);
    const ConstraintSpec exact(rho, eps);
    const ConstraintSpec used = exact.with_perturbed_beta(opt.beta_perturbation);

    double j_tilde = 0.0;
    for (int j = 0; j < k; ++j) {
      double y = 0.0;
      double disc = 1.0;
      double aug = 0.0;
      for (double c : trajs[j]) {
        aug += disc * augmented_cost(c, y, disc, used);
        y += disc * c;
        disc *= g;
      }
      j_tilde += prob[j] * aug;
    }
    const double sigma2 = std::max(0.0, mu2 - mu * mu);
    const double reference = (1.0 / eps - 1.0) * sigma2 - (rho - mu) * (rho - mu);
    const double value = j_tilde - d_bound(mu, used);
    const double err = std::abs(value - reference) / (1.0 + std::abs(reference));
    r.worst = std::max(r.worst, err);
    ++r.cases;
    if (!(err < 1e-9)) ++r.failures;
  }
  return r;
}

SuiteResult chebyshev_suite(const SelftestOptions& opt, std::mt19937_64& rng) {
  SuiteResult r{"chebyshev validity"};
  r.worst = -1.0;
  std::uniform_int_distribution<int> support(2, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int attempts = 0;
  while (r.cases < opt.chebyshev && attempts < 100 * opt.chebyshev) {
    ++attempts;
    const double rho = 1.0 + 30.0 * unit(rng);
    const double eps = 0.01 + 0.5 * unit(rng);
    const ConstraintSpec spec(rho, eps);
    const int n = support(rng);
    std::vector<double> v(static_cast<std::size_t>(n));
    std::vector<double> p(static_cast<std::size_t>(n));
    double psum = 0.0;
    for (int j = 0; j < n; ++j) {
      v[j] = 40.0 * unit(rng);
      p[j] = unit(rng) + 1e-3;
      psum += p[j];
    }
    double m = 0.0;
    for (int j = 0; j < n; ++j) {
      p[j] /= psum;
      m += p[j] * v[j];
    }
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += p[j] * (v[j] - m) * (v[j] - m);
    if (!(var > 0.0)) continue;
    // Move the mean below rho and shrink the spread into the feasible region,
    // landing on the boundary for a quarter of the cases.
    const double target_mean = rho * unit(rng);
    const double s_max = (rho - target_mean) / std::sqrt(spec.beta() * var);
    const double s = s_max * (attempts % 4 == 0 ? 1.0 : unit(rng));
    double mu = 0.0;
    double mu2 = 0.0;
    for (int j = 0; j < n; ++j) {
      v[j] = target_mean + s * (v[j] - m);
      mu += p[j] * v[j];
      mu2 += p[j] * v[j] * v[j];
    }
    const double sigma2 = std::max(0.0, mu2 - mu * mu);
    if (!(mu < rho) || chebyshev_lhs(mu, sigma2, spec) > 0.0) continue;
    double tail = 0.0;
    for (int j = 0; j < n; ++j)
      if (v[j] >= rho) tail += p[j];
    ++r.cases;
    r.worst = std::max(r.worst, tail - eps);
    if (tail > eps + 1e-12) ++r.failures;
  }
  return r;
}

}  // namespace

std::vector<SuiteResult> run_selftest(const SelftestOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<SuiteResult> out;
  out.push_back(square_return_suite(options, rng));
  out.push_back(augmented_identity_suite(options, rng));
  out.push_back(chebyshev_suite(options, rng));
  return out;
}

}  // namespace varcpo
