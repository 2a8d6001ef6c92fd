#ifndef VARCPO_SOLVER_HPP_
#define VARCPO_SOLVER_HPP_

#include <functional>
#include <stdexcept>
#include <string_view>

#include <Eigen/Core>

namespace varcpo {

using Vector = Eigen::VectorXd;
using LinearOperator = std::function<Vector(const Vector&)>;

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CgResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;  ///< ||A x - rhs|| / ||rhs|| at exit
  bool converged = false;
};

/// Conjugate gradient on a symmetric positive-definite operator. Stops when
/// the relative residual drops to `tol` or after `max_iters` iterations.
/// Throws SolverError on non-finite iterates.
CgResult conjugate_gradient(const LinearOperator& op, const Vector& rhs, int max_iters, double tol);

enum class DualCase { Unconstrained, Constrained, InfeasibleRecovery, Unresolvable };

std::string_view to_string(DualCase c);

struct SolverSettings {
  double delta = 0.01;
  int cg_iters = 20;
  double cg_tol = 1e-8;
  double damping = 0.1;
  double backtrack = 0.8;
  int max_backtracks = 10;

  void validate() const;
};

/// max g^T x  s.t.  c + b^T x <= 0,  0.5 x^T H x <= delta.
struct StepProblem {
  Vector g;
  Vector b;
  double c = 0.0;
  double delta = 0.01;
  LinearOperator fvp;
};

struct StepReport {
  double direction_norm = 0.0;
  DualCase dual_case = DualCase::Unconstrained;
  int cg_iterations = 0;
  double cg_residual = 0.0;
  bool cg_converged = true;
  int backtracks = 0;
  bool accepted = true;
  double kl = 0.0;
  double surrogate_change = 0.0;
  double constraint_before = 0.0;
  double constraint_after = 0.0;
  double lambda = 0.0;  ///< trust-region multiplier
  double nu = 0.0;      ///< linear-constraint multiplier
};

struct StepSolution {
  Vector direction;
  StepReport report;
};

/// Analytic two-multiplier dual over the CG solutions H^-1 g and H^-1 b.
/// When no point of the KL ball satisfies the linearized constraint, returns
/// the recovery direction -sqrt(2 delta / b^T H^-1 b) H^-1 b.
StepSolution solve_step(const StepProblem& problem, const SolverSettings& settings);

/// Quantities evaluated at a trial parameter vector.
struct TrialEvaluation {
  double kl = 0.0;
  double objective_change = 0.0;  ///< surrogate objective minus its value at theta_k
  double constraint_value = 0.0;  ///< c plus the surrogate constraint change
};

using TrialEvaluator = std::function<TrialEvaluation(const Vector& theta)>;

struct LineSearchResult {
  Vector theta;
  bool accepted = false;
  int backtracks = 0;
  TrialEvaluation evaluation;
};

/// Exponential backtracking from theta_k + direction. Accepts the first
/// trial with KL <= delta whose constraint surrogate stays <= max(c, 0) and,
/// outside the recovery case, whose objective surrogate does not decrease.
/// Keeps theta_k when every trial fails.
LineSearchResult line_search(const Vector& theta_k, const Vector& direction, DualCase dual_case, double c,
                             const TrialEvaluator& evaluate, const SolverSettings& settings);

}  // namespace varcpo

#endif  // VARCPO_SOLVER_HPP_
