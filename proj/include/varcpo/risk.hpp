#ifndef VARCPO_RISK_HPP_
#define VARCPO_RISK_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace varcpo {

/// Constraint handling used for a policy update.
enum class ConstraintMode { VaR, Recovery, ExpectedCost, Unconstrained };

std::string_view to_string(ConstraintMode mode);
ConstraintMode parse_constraint_mode(std::string_view text);

/// Value-at-Risk constraint P(C >= rho) <= epsilon, with beta = 1/epsilon - 1.
class ConstraintSpec {
 public:
  ConstraintSpec(double rho, double epsilon, ConstraintMode mode = ConstraintMode::VaR);

  double rho() const { return rho_; }
  double epsilon() const { return epsilon_; }
  double beta() const { return beta_; }
  ConstraintMode mode() const { return mode_; }

  ConstraintSpec with_mode(ConstraintMode mode) const;
  /// Test hook: returns a copy whose beta is offset by `delta`, breaking the
  /// beta = 1/epsilon - 1 invariant on purpose.
  ConstraintSpec with_perturbed_beta(double delta) const;

 private:
  double rho_;
  double epsilon_;
  double beta_;
  ConstraintMode mode_;
};

/// Batch estimates of the mean cost return and the augmented-cost return.
struct MomentEstimates {
  double mu = 0.0;
  double j_tilde = 0.0;
  int sample_count = 1;
};

struct ConstraintEval {
  double c_offset = 0.0;  ///< J_tilde - d(mu)
  double d_value = 0.0;   ///< d(mu)
  bool feasible = true;   ///< c_offset <= 0
};

/// beta * sigma2 - (rho - mu)^2. Non-positive means the one-sided Chebyshev
/// bound certifies P(C >= rho) <= epsilon (valid for mu < rho).
double chebyshev_lhs(double mu, double sigma2, const ConstraintSpec& spec);

/// Per-step augmented cost beta * discount * c^2 + 2 (beta * y + rho) c,
/// where discount = gamma_c^t and y is the accumulated discounted cost
/// before the step.
double augmented_cost(double cost, double accumulated_cost, double discount, const ConstraintSpec& spec);

/// Dynamic bound d(mu) = mu^2 / epsilon + rho^2.
double d_bound(double mu, const ConstraintSpec& spec);

ConstraintEval constraint_eval(const MomentEstimates& moments, const ConstraintSpec& spec);

/// True iff mu >= rho; the Chebyshev surrogate is not valid there.
bool recovery_needed(double mu, const ConstraintSpec& spec);

/// Horizon factor standing in for 1 / (1 - gamma_c). Falls back to
/// `episodic_horizon` (the batch's mean episode length) when gamma_c == 1.
double horizon_factor(double cost_discount, double episodic_horizon);

/// Coefficient of the expected cost-advantage term in the gradient of the
/// linearized bound at the current policy: 2 mu_k / epsilon * horizon.
double dhat_linear_coeff(double mu_k, const ConstraintSpec& spec, double horizon);

/// Value of the linearized bound change d_hat(pi) - d(pi_k) for an expected
/// cost-advantage Z (per-step, un-normalized).
double dhat_change(double z, double mu_k, const ConstraintSpec& spec, double horizon);

struct SquareReturnCheck {
  double lhs = 0.0;  ///< (sum_t gamma_c^t c_t)^2
  double rhs = 0.0;  ///< sum_t gamma_c^t (gamma_c^t c_t^2 + 2 y_t c_t)
};

SquareReturnCheck square_return_decomposition(std::span<const double> costs, double cost_discount);

/// Worst-case post-update Chebyshev violation
/// K (alpha_tilde + 2 alpha_c M / epsilon), K = sqrt(2 delta) gamma_c / (1 - gamma_c)^2,
/// M = mu_k + alpha_c / (1 - gamma_c). Empty when gamma_c >= 1.
std::optional<double> worst_case_bound(double alpha_tilde, double alpha_c, double mu_k, double delta,
                                       double cost_discount, double epsilon);

}  // namespace varcpo

#endif  // VARCPO_RISK_HPP_
