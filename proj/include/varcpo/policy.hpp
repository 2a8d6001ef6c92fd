#ifndef VARCPO_POLICY_HPP_
#define VARCPO_POLICY_HPP_

#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "varcpo/cmdp.hpp"
#include "varcpo/mlp.hpp"

namespace varcpo {

enum class HeadKind { CategoricalPolicy, GaussianPolicy, ValueHead };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);

struct Architecture {
  int input_dim = 1;
  std::vector<int> hidden{64, 64};
  int output_dim = 1;
  std::string activation = "tanh";

  std::vector<int> layer_sizes() const;
};

/// Approximator input: base observation, y scaled by `y_scale`, discount.
Vector encode_features(const AugmentedState& state, double y_scale);
int feature_dim(int observation_dim);

struct CategoricalDist {
  Vector probs;
};

struct GaussianDist {
  Vector mean;
  Vector log_std;
};

using PolicyDistribution = std::variant<CategoricalDist, GaussianDist>;

/// Actions for a batch: indices for categorical heads, one column per
/// sample for Gaussian heads.
struct ActionBatch {
  std::vector<int> indices;
  Matrix values;

  Eigen::Index size() const { return indices.empty() ? values.cols() : static_cast<Eigen::Index>(indices.size()); }
  void push_back(const Action& action);
};

/// Stochastic policy head: softmax over logits, or a diagonal Gaussian
/// whose mean comes from the network and whose log-stddev is a free,
/// state-independent parameter vector stored after the network weights.
class Policy {
 public:
  Policy(HeadKind kind, Architecture arch, double log_std_min = -5.0, double log_std_max = 1.0);

  HeadKind kind() const { return kind_; }
  const Architecture& architecture() const { return arch_; }
  int parameter_count() const { return static_cast<int>(params_.size()); }
  const Vector& parameters() const { return params_; }
  void set_parameters(const Vector& params);
  double log_std_min() const { return log_std_min_; }
  double log_std_max() const { return log_std_max_; }

  /// Orthogonal hidden layers, zero output layer, log-stddev `log_std_init`.
  void initialize(std::mt19937_64& rng, double log_std_init = -0.5);

  PolicyDistribution forward(const Vector& features) const;
  Action sample(const Vector& features, std::mt19937_64& rng) const;
  /// Most likely action (argmax / mean).
  Action mode(const Vector& features) const;

  double log_prob(const Vector& features, const Action& action) const;
  Vector log_prob_grad(const Vector& features, const Action& action) const;

  Vector log_probs(const Matrix& features, const ActionBatch& actions) const;
  /// sum_i weights_i * grad log pi(a_i | x_i).
  Vector weighted_log_prob_grad(const Matrix& features, const ActionBatch& actions, const Vector& weights) const;

  /// Mean over columns of KL(old(.|x) || this(.|x)).
  double mean_kl(const Policy& old, const Matrix& features) const;
  /// Gradient of mean_kl with respect to this policy's parameters.
  Vector mean_kl_grad(const Policy& old, const Matrix& features) const;
  /// (F + damping I) v with F the batch-average Fisher information.
  Vector fisher_vector_product(const Matrix& features, const Vector& v, double damping) const;

  /// Clamped log-stddev (Gaussian heads only).
  Vector log_std() const;

 private:
  int net_params() const { return net_.parameter_count(); }
  Vector net_view() const { return params_.head(net_params()); }
  Matrix outputs(const Matrix& features, Mlp::Cache* cache) const;

  HeadKind kind_;
  Architecture arch_;
  Mlp net_;
  Vector params_;
  double log_std_min_;
  double log_std_max_;
};

/// Scalar critic V(x). Predictions are network output times `output_scale`
/// so the network can regress O(1) targets.
class ValueHead {
 public:
  explicit ValueHead(Architecture arch, double output_scale = 1.0);

  const Architecture& architecture() const { return arch_; }
  int parameter_count() const { return net_.parameter_count(); }
  const Vector& parameters() const { return params_; }
  void set_parameters(const Vector& params);
  double output_scale() const { return output_scale_; }
  void set_output_scale(double s) { output_scale_ = s; }

  void initialize(std::mt19937_64& rng, double output_gain = 1.0);

  double value(const Vector& features) const;
  Vector values(const Matrix& features) const;
  /// Gradient of the (unscaled) network output at a single input.
  Vector value_grad(const Vector& features) const;
  /// Mean squared error in network units against targets / output_scale.
  double mse(const Matrix& features, const Vector& targets) const;
  Vector mse_grad(const Matrix& features, const Vector& targets, double* loss = nullptr) const;

 private:
  Architecture arch_;
  Mlp net_;
  Vector params_;
  double output_scale_;
};

}  // namespace varcpo

#endif  // VARCPO_POLICY_HPP_
