#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "varcpo/policy.hpp"

namespace varcpo {

ValueHead::ValueHead(Architecture arch, double output_scale)
    : arch_(std::move(arch)), net_(arch_.layer_sizes()), output_scale_(output_scale) {
  if (arch_.output_dim != 1) throw std::invalid_argument("value head must have a scalar output");
  if (!(output_scale_ > 0.0)) throw std::invalid_argument("value head output scale must be positive");
  params_ = Vector::Zero(net_.parameter_count());
}

void ValueHead::set_parameters(const Vector& params) {
  if (params.size() != params_.size()) throw std::invalid_argument("value parameter vector has wrong size");
  params_ = params;
}

void ValueHead::initialize(std::mt19937_64& rng, double output_gain) {
  net_.initialize(params_, rng, std::sqrt(2.0), output_gain);
}

double ValueHead::value(const Vector& features) const {
  return net_.forward(params_, Matrix(features))(0, 0) * output_scale_;
}

Vector ValueHead::values(const Matrix& features) const {
  return net_.forward(params_, features).row(0).transpose() * output_scale_;
}

Vector ValueHead::value_grad(const Vector& features) const {
  Mlp::Cache cache;
  net_.forward(params_, Matrix(features), &cache);
  return net_.backward(params_, cache, Matrix::Ones(1, 1));
}

double ValueHead::mse(const Matrix& features, const Vector& targets) const {
  const Vector pred = net_.forward(params_, features).row(0).transpose();
  return (pred - targets / output_scale_).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, targets.size()));
}

Vector ValueHead::mse_grad(const Matrix& features, const Vector& targets, double* loss) const {
  if (features.cols() != targets.size()) throw std::invalid_argument("value targets do not match features");
  Mlp::Cache cache;
  const Vector pred = net_.forward(params_, features, &cache).row(0).transpose();
  const Vector err = pred - targets / output_scale_;
  const double n = static_cast<double>(std::max<Eigen::Index>(1, targets.size()));
  if (loss) *loss = err.squaredNorm() / n;
  return net_.backward(params_, cache, (2.0 / n) * err.transpose());
}

}  // namespace varcpo
