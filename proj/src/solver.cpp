#include "varcpo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace varcpo {

namespace {

constexpr double kTiny = 1e-12;

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw SolverError(std::string("non-finite values in ") + what);
}

}  // namespace

std::string_view to_string(DualCase c) {
  switch (c) {
    case DualCase::Unconstrained: return "unconstrained";
    case DualCase::Constrained: return "constrained";
    case DualCase::InfeasibleRecovery: return "infeasible_recovery";
    case DualCase::Unresolvable: return "unresolvable";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (!(delta > 0.0)) throw std::invalid_argument("trust-region radius delta must be positive");
  if (cg_iters < 1) throw std::invalid_argument("cg_iters must be >= 1");
  if (!(cg_tol > 0.0)) throw std::invalid_argument("cg_tol must be positive");
  if (!(damping >= 0.0)) throw std::invalid_argument("damping must be non-negative");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("backtrack factor must lie in (0,1)");
  if (max_backtracks < 1) throw std::invalid_argument("max_backtracks must be >= 1");
}

CgResult conjugate_gradient(const LinearOperator& op, const Vector& rhs, int max_iters, double tol) {
  require_finite(rhs, "CG right-hand side");
  CgResult out;
  out.x = Vector::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.converged = true;
    return out;
  }
  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  for (int k = 0; k < max_iters; ++k) {
    const Vector ap = op(p);
    require_finite(ap, "Fisher-vector product");
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) throw SolverError("CG operator is not positive definite along the search direction");
    const double alpha = rr / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    out.iterations = k + 1;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= tol * rhs_norm) {
      rr = rr_new;
      out.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  require_finite(out.x, "CG solution");
  out.residual = std::sqrt(rr) / rhs_norm;
  return out;
}

StepSolution solve_step(const StepProblem& problem, const SolverSettings& settings) {
  const Vector& g = problem.g;
  const Vector& b = problem.b;
  const double c = problem.c;
  const double delta = problem.delta;
  if (g.size() != b.size()) throw std::invalid_argument("solve_step: g and b differ in dimension");
  if (!(delta > 0.0)) throw std::invalid_argument("solve_step: delta must be positive");

  StepSolution sol;
  auto& rep = sol.report;
  rep.constraint_before = c;

  const CgResult cg_g = conjugate_gradient(problem.fvp, g, settings.cg_iters, settings.cg_tol);
  rep.cg_iterations = cg_g.iterations;
  rep.cg_residual = cg_g.residual;
  rep.cg_converged = cg_g.converged;
  const Vector& v = cg_g.x;
  const double q = std::max(0.0, g.dot(v));

  Vector unconstrained = Vector::Zero(g.size());
  if (q > kTiny * kTiny) {
    rep.lambda = std::sqrt(q / (2.0 * delta));
    unconstrained = v / rep.lambda;
  }

  auto finish = [&](Vector x, DualCase dc) {
    rep.dual_case = dc;
    rep.direction_norm = x.norm();
    rep.constraint_after = std::isfinite(c) ? c + b.dot(x) : c;
    sol.direction = std::move(x);
    return sol;
  };

  if (b.norm() < kTiny || !std::isfinite(c)) {
    if (c > 0.0) return finish(Vector::Zero(g.size()), DualCase::Unresolvable);
    return finish(unconstrained, DualCase::Unconstrained);
  }

  if (c + b.dot(unconstrained) <= 0.0) return finish(unconstrained, DualCase::Unconstrained);

  const CgResult cg_b = conjugate_gradient(problem.fvp, b, settings.cg_iters, settings.cg_tol);
  rep.cg_iterations += cg_b.iterations;
  rep.cg_residual = std::max(rep.cg_residual, cg_b.residual);
  rep.cg_converged = rep.cg_converged && cg_b.converged;
  const Vector& w = cg_b.x;
  const double r = g.dot(w);
  const double s = b.dot(w);
  if (!(s > 0.0)) return finish(Vector::Zero(g.size()), DualCase::Unresolvable);

  if (c > 0.0 && c * c / s > 2.0 * delta) {
    rep.lambda = 0.0;
    rep.nu = 0.0;
    return finish(-std::sqrt(2.0 * delta / s) * w, DualCase::InfeasibleRecovery);
  }

  const double a_term = q - r * r / s;
  const double b_term = 2.0 * delta - c * c / s;
  // g parallel to b, or a feasible set that is a single point: the best
  // feasible point sits on the constraint boundary along -H^-1 b.
  if (a_term <= 1e-10 * std::max(q, kTiny) || b_term <= kTiny) {
    rep.nu = 0.0;
    return finish(-(c / s) * w, DualCase::Constrained);
  }

  const double lam_a = std::sqrt(a_term / b_term);
  const double lam_b = std::sqrt(q / (2.0 * delta));
  auto dual_a = [&](double lam) { return a_term / (2.0 * lam) + b_term * lam / 2.0 - r * c / s; };
  auto dual_b = [&](double lam) { return q / (2.0 * lam) + lam * delta; };

  double lam = lam_b;
  if (c == 0.0) {
    lam = r > 0.0 ? lam_a : lam_b;
  } else {
    const double lam_mid = -r / c;
    if (lam_mid > 0.0) {
      double la = lam_a;
      double lb = lam_b;
      if (c < 0.0) {
        la = std::min(lam_a, lam_mid);
        lb = std::max(lam_b, lam_mid);
      } else {
        la = std::max(lam_a, lam_mid);
        lb = std::min(lam_b, lam_mid);
      }
      lam = dual_a(la) <= dual_b(lb) ? la : lb;
    } else {
      lam = c < 0.0 ? lam_b : lam_a;
    }
  }
  const double nu = std::max(0.0, (lam * c + r) / s);
  rep.lambda = lam;
  rep.nu = nu;
  return finish((v - nu * w) / lam, nu > 0.0 ? DualCase::Constrained : DualCase::Unconstrained);
}

LineSearchResult line_search(const Vector& theta_k, const Vector& direction, DualCase dual_case, double c,
                             const TrialEvaluator& evaluate, const SolverSettings& settings) {
  LineSearchResult out;
  out.theta = theta_k;
  if (direction.norm() == 0.0) {
    out.accepted = true;
    out.evaluation = evaluate(theta_k);
    return out;
  }
  const bool check_constraint = std::isfinite(c);
  const double limit = std::max(c, 0.0);
  double step = 1.0;
  for (int j = 0; j < settings.max_backtracks; ++j, step *= settings.backtrack) {
    const Vector trial = theta_k + step * direction;
    const TrialEvaluation e = evaluate(trial);
    const bool kl_ok = std::isfinite(e.kl) && e.kl <= settings.delta;
    const bool objective_ok = dual_case == DualCase::InfeasibleRecovery || e.objective_change >= 0.0;
    const bool constraint_ok = !check_constraint || e.constraint_value <= limit;
    if (kl_ok && objective_ok && constraint_ok) {
      out.theta = trial;
      out.accepted = true;
      out.backtracks = j;
      out.evaluation = e;
      return out;
    }
  }
  out.accepted = false;
  out.backtracks = settings.max_backtracks;
  out.evaluation = evaluate(theta_k);
  return out;
}

}  // namespace varcpo
