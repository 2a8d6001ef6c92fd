#ifndef VARCPO_MLP_HPP_
#define VARCPO_MLP_HPP_

#include <random>
#include <vector>

#include <Eigen/Core>

namespace varcpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Fully connected tanh network with a linear output layer, evaluated on
/// batches stored column-wise (one sample per column).
///
/// Parameters live in a flat vector owned by the caller. Layer l stores its
/// weight matrix (column-major, out x in) followed by its bias.
class Mlp {
 public:
  /// `sizes` lists the input width, each hidden width, then the output width.
  explicit Mlp(std::vector<int> sizes);

  struct Cache {
    std::vector<Matrix> activations;  ///< input, each hidden layer, output
  };

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int parameter_count() const { return parameter_count_; }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  /// Offset of layer l's weights in the flat vector; the bias follows them.
  int weight_offset(int layer) const { return offsets_[layer]; }

  Matrix forward(const Vector& params, const Matrix& inputs, Cache* cache = nullptr) const;

  /// Sum over columns of J_i^T upstream_i, where J_i is the Jacobian of the
  /// i-th output column with respect to the parameters.
  Vector backward(const Vector& params, const Cache& cache, const Matrix& upstream) const;

  /// Directional derivative of the outputs along `direction` in parameter space.
  Matrix jvp(const Vector& params, const Cache& cache, const Vector& direction) const;

  /// Orthogonal hidden weights scaled by `hidden_gain`, output weights scaled
  /// by `output_gain` (zero gives a zero output layer), zero biases.
  void initialize(Vector& params, std::mt19937_64& rng, double hidden_gain, double output_gain) const;

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int parameter_count_ = 0;
};

}  // namespace varcpo

#endif  // VARCPO_MLP_HPP_
