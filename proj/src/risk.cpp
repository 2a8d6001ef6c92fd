#include "varcpo/risk.hpp"

#include <cmath>
#include <stdexcept>

namespace varcpo {

std::string_view to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::VaR: return "var";
    case ConstraintMode::Recovery: return "recovery";
    case ConstraintMode::ExpectedCost: return "expected_cost";
    case ConstraintMode::Unconstrained: return "unconstrained";
  }
  return "unknown";
}

ConstraintMode parse_constraint_mode(std::string_view text) {
  if (text == "var" || text == "varcpo") return ConstraintMode::VaR;
  if (text == "recovery") return ConstraintMode::Recovery;
  if (text == "expected_cost" || text == "cpo") return ConstraintMode::ExpectedCost;
  if (text == "unconstrained" || text == "trpo") return ConstraintMode::Unconstrained;
  throw std::invalid_argument("unknown constraint mode '" + std::string(text) + "'");
}

ConstraintSpec::ConstraintSpec(double rho, double epsilon, ConstraintMode mode)
    : rho_(rho), epsilon_(epsilon), beta_(1.0 / epsilon - 1.0), mode_(mode) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be positive and finite");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
}

ConstraintSpec ConstraintSpec::with_mode(ConstraintMode mode) const {
  ConstraintSpec copy = *this;
  copy.mode_ = mode;
  return copy;
}

ConstraintSpec ConstraintSpec::with_perturbed_beta(double delta) const {
  ConstraintSpec copy = *this;
  copy.beta_ += delta;
  return copy;
}

double chebyshev_lhs(double mu, double sigma2, const ConstraintSpec& spec) {
  const double gap = spec.rho() - mu;
  return spec.beta() * sigma2 - gap * gap;
}

double augmented_cost(double cost, double accumulated_cost, double discount, const ConstraintSpec& spec) {
  return spec.beta() * discount * cost * cost + 2.0 * (spec.beta() * accumulated_cost + spec.rho()) * cost;
}

double d_bound(double mu, const ConstraintSpec& spec) {
  return mu * mu / spec.epsilon() + spec.rho() * spec.rho();
}

ConstraintEval constraint_eval(const MomentEstimates& moments, const ConstraintSpec& spec) {
  ConstraintEval eval;
  eval.d_value = d_bound(moments.mu, spec);
  eval.c_offset = moments.j_tilde - eval.d_value;
  eval.feasible = eval.c_offset <= 0.0;
  return eval;
}

bool recovery_needed(double mu, const ConstraintSpec& spec) { return mu >= spec.rho(); }

double horizon_factor(double cost_discount, double episodic_horizon) {
  if (cost_discount < 1.0) return 1.0 / (1.0 - cost_discount);
  if (!(episodic_horizon > 0.0)) throw std::invalid_argument("episodic horizon must be positive when gamma_c = 1");
  return episodic_horizon;
}

double dhat_linear_coeff(double mu_k, const ConstraintSpec& spec, double horizon) {
  return 2.0 * mu_k / spec.epsilon() * horizon;
}

double dhat_change(double z, double mu_k, const ConstraintSpec& spec, double horizon) {
  const double hz = horizon * z;
  return (2.0 * mu_k * hz + hz * hz) / spec.epsilon();
}

SquareReturnCheck square_return_decomposition(std::span<const double> costs, double cost_discount) {
  SquareReturnCheck out;
  double total = 0.0;
  double y = 0.0;
  double discount = 1.0;
  for (double c : costs) {
    total += discount * c;
    out.rhs += discount * (discount * c * c + 2.0 * y * c);
    y += discount * c;
    discount *= cost_discount;
  }
  out.lhs = total * total;
  return out;
}

std::optional<double> worst_case_bound(double alpha_tilde, double alpha_c, double mu_k, double delta,
                                       double cost_discount, double epsilon) {
  if (cost_discount >= 1.0) return std::nullopt;
  const double one_minus = 1.0 - cost_discount;
  const double k = std::sqrt(2.0 * delta) * cost_discount / (one_minus * one_minus);
  const double m = mu_k + alpha_c / one_minus;
  return k * (alpha_tilde + 2.0 * alpha_c / epsilon * m);
}

}  // namespace varcpo
