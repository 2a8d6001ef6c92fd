#include "varcpo/mlp.hpp"

#include <stdexcept>

#include <Eigen/QR>

namespace varcpo {

namespace {

// tanh(z) = 1 - 2 / (exp(2z) + 1); Eigen vectorizes exp but not tanh for doubles.
Matrix fast_tanh(const Matrix& z) { return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix(); }

using ConstMatMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;

}  // namespace

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
  for (int l = 0; l < layer_count(); ++l) {
    offsets_.push_back(parameter_count_);
    parameter_count_ += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
}

Matrix Mlp::forward(const Vector& params, const Matrix& inputs, Cache* cache) const {
  if (params.size() != parameter_count_) throw std::invalid_argument("Mlp parameter vector has wrong size");
  if (inputs.rows() != input_dim()) throw std::invalid_argument("Mlp input dimension mismatch");
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(sizes_.size());
    cache->activations.push_back(inputs);
  }
  Matrix a = inputs;
  for (int l = 0; l < layer_count(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    ConstMatMap w(params.data() + offsets_[l], out, in);
    ConstVecMap b(params.data() + offsets_[l] + out * in, out);
    Matrix z = w * a;
    z.colwise() += b;
    if (l + 1 < layer_count()) z = fast_tanh(z);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Vector Mlp::backward(const Vector& params, const Cache& cache, const Matrix& upstream) const {
  Vector grad = Vector::Zero(parameter_count_);
  Matrix delta = upstream;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Matrix& prev = cache.activations[l];
    Eigen::Map<Matrix>(grad.data() + offsets_[l], out, in).noalias() = delta * prev.transpose();
    Eigen::Map<Vector>(grad.data() + offsets_[l] + out * in, out) = delta.rowwise().sum();
    if (l > 0) {
      ConstMatMap w(params.data() + offsets_[l], out, in);
      Matrix back = w.transpose() * delta;
      delta = back.array() * (1.0 - prev.array().square());
    }
  }
  return grad;
}

Matrix Mlp::jvp(const Vector& params, const Cache& cache, const Vector& direction) const {
  if (direction.size() != parameter_count_) throw std::invalid_argument("jvp direction has wrong size");
  const auto n = cache.activations.front().cols();
  Matrix tangent = Matrix::Zero(input_dim(), n);
  for (int l = 0; l < layer_count(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    ConstMatMap w(params.data() + offsets_[l], out, in);
    ConstMatMap dw(direction.data() + offsets_[l], out, in);
    ConstVecMap db(direction.data() + offsets_[l] + out * in, out);
    Matrix dz = dw * cache.activations[l];
    if (l > 0) dz.noalias() += w * tangent;
    dz.colwise() += db;
    if (l + 1 < layer_count()) {
      const Matrix& a = cache.activations[l + 1];
      tangent = dz.array() * (1.0 - a.array().square());
    } else {
      tangent = std::move(dz);
    }
  }
  return tangent;
}

void Mlp::initialize(Vector& params, std::mt19937_64& rng, double hidden_gain, double output_gain) const {
  params = Vector::Zero(parameter_count_);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < layer_count(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double gain = l + 1 < layer_count() ? hidden_gain : output_gain;
    if (gain == 0.0) continue;
    const int big = std::max(in, out);
    Matrix g(big, big);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(big, big);
    Eigen::Map<Matrix>(params.data() + offsets_[l], out, in) = gain * q.topLeftCorner(out, in);
  }
}

}  // namespace varcpo
