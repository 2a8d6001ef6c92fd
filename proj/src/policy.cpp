#include "varcpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace varcpo {

namespace {

Matrix softmax_columns(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const double m = p.col(j).maxCoeff();
    p.col(j) = (p.col(j).array() - m).exp().matrix();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

Matrix single_column(const Vector& x) { return Matrix(x); }

}  // namespace

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::CategoricalPolicy: return "CategoricalPolicy";
    case HeadKind::GaussianPolicy: return "GaussianPolicy";
    case HeadKind::ValueHead: return "ValueHead";
  }
  return "Unknown";
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "CategoricalPolicy") return HeadKind::CategoricalPolicy;
  if (text == "GaussianPolicy") return HeadKind::GaussianPolicy;
  if (text == "ValueHead") return HeadKind::ValueHead;
  throw std::invalid_argument("unknown head kind '" + std::string(text) + "'");
}

std::vector<int> Architecture::layer_sizes() const {
  if (activation != "tanh") throw std::invalid_argument("only tanh activations are supported");
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  return sizes;
}

Vector encode_features(const AugmentedState& state, double y_scale) {
  const auto n = state.base_observation.size();
  Vector f(n + 2);
  f.head(n) = state.base_observation;
  f[n] = state.accumulated_cost * y_scale;
  f[n + 1] = state.discount;
  return f;
}

int feature_dim(int observation_dim) { return observation_dim + 2; }

void ActionBatch::push_back(const Action& action) {
  if (action.index >= 0) {
    indices.push_back(action.index);
    return;
  }
  const auto col = values.cols();
  if (col == 0) values.resize(action.values.size(), 0);
  values.conservativeResize(Eigen::NoChange, col + 1);
  values.col(col) = action.values;
}

// ---------------------------------------------------------------------------

Policy::Policy(HeadKind kind, Architecture arch, double log_std_min, double log_std_max)
    : kind_(kind), arch_(std::move(arch)), net_(arch_.layer_sizes()),
      log_std_min_(log_std_min), log_std_max_(log_std_max) {
  if (kind_ == HeadKind::ValueHead) throw std::invalid_argument("Policy cannot have a ValueHead kind");
  if (kind_ == HeadKind::CategoricalPolicy && arch_.output_dim < 2)
    throw std::invalid_argument("categorical policy needs at least two actions");
  if (!(log_std_min_ < log_std_max_)) throw std::invalid_argument("log-stddev range is empty");
  const int extra = kind_ == HeadKind::GaussianPolicy ? arch_.output_dim : 0;
  params_ = Vector::Zero(net_.parameter_count() + extra);
}

void Policy::set_parameters(const Vector& params) {
  if (params.size() != params_.size()) throw std::invalid_argument("policy parameter vector has wrong size");
  params_ = params;
}

void Policy::initialize(std::mt19937_64& rng, double log_std_init) {
  Vector net;
  net_.initialize(net, rng, std::sqrt(2.0), 0.0);
  params_.head(net_params()) = net;
  if (kind_ == HeadKind::GaussianPolicy) params_.tail(arch_.output_dim).setConstant(log_std_init);
}

Vector Policy::log_std() const {
  if (kind_ != HeadKind::GaussianPolicy) return {};
  return params_.tail(arch_.output_dim).cwiseMax(log_std_min_).cwiseMin(log_std_max_);
}

Matrix Policy::outputs(const Matrix& features, Mlp::Cache* cache) const {
  return net_.forward(net_view(), features, cache);
}

PolicyDistribution Policy::forward(const Vector& features) const {
  const Matrix out = outputs(single_column(features), nullptr);
  if (kind_ == HeadKind::CategoricalPolicy) return CategoricalDist{softmax_columns(out).col(0)};
  return GaussianDist{out.col(0), log_std()};
}

Action Policy::sample(const Vector& features, std::mt19937_64& rng) const {
  const auto dist = forward(features);
  if (const auto* cat = std::get_if<CategoricalDist>(&dist)) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double draw = u(rng);
    double acc = 0.0;
    const int n = static_cast<int>(cat->probs.size());
    for (int a = 0; a < n; ++a) {
      acc += cat->probs[a];
      if (draw < acc) return Action::discrete(a);
    }
    return Action::discrete(n - 1);
  }
  const auto& g = std::get<GaussianDist>(dist);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector a(g.mean.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = g.mean[i] + std::exp(g.log_std[i]) * normal(rng);
  return Action::continuous(std::move(a));
}

Action Policy::mode(const Vector& features) const {
  const auto dist = forward(features);
  if (const auto* cat = std::get_if<CategoricalDist>(&dist)) {
    Eigen::Index best = 0;
    cat->probs.maxCoeff(&best);
    return Action::discrete(static_cast<int>(best));
  }
  return Action::continuous(std::get<GaussianDist>(dist).mean);
}

double Policy::log_prob(const Vector& features, const Action& action) const {
  ActionBatch batch;
  batch.push_back(action);
  return log_probs(single_column(features), batch)[0];
}

Vector Policy::log_prob_grad(const Vector& features, const Action& action) const {
  ActionBatch batch;
  batch.push_back(action);
  return weighted_log_prob_grad(single_column(features), batch, Vector::Ones(1));
}

Vector Policy::log_probs(const Matrix& features, const ActionBatch& actions) const {
  const Matrix out = outputs(features, nullptr);
  const auto n = features.cols();
  if (actions.size() != n) throw std::invalid_argument("action batch does not match feature batch");
  Vector lp(n);
  if (kind_ == HeadKind::CategoricalPolicy) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double m = out.col(j).maxCoeff();
      const double lse = m + std::log((out.col(j).array() - m).exp().sum());
      lp[j] = out(actions.indices[j], j) - lse;
    }
    return lp;
  }
  const Vector ls = log_std();
  const Vector inv_var = (-2.0 * ls).array().exp();
  const double norm = ls.sum() + 0.5 * static_cast<double>(ls.size()) * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector diff = actions.values.col(j) - out.col(j);
    lp[j] = -0.5 * diff.cwiseProduct(diff).dot(inv_var) - norm;
  }
  return lp;
}

Vector Policy::weighted_log_prob_grad(const Matrix& features, const ActionBatch& actions,
                                      const Vector& weights) const {
  Mlp::Cache cache;
  const Matrix out = outputs(features, &cache);
  const auto n = features.cols();
  if (actions.size() != n || weights.size() != n)
    throw std::invalid_argument("action/weight batch does not match feature batch");
  Vector grad = Vector::Zero(params_.size());
  if (kind_ == HeadKind::CategoricalPolicy) {
    Matrix upstream = -softmax_columns(out);
    for (Eigen::Index j = 0; j < n; ++j) {
      upstream(actions.indices[j], j) += 1.0;
      upstream.col(j) *= weights[j];
    }
    grad.head(net_params()) = net_.backward(net_view(), cache, upstream);
    return grad;
  }
  const Vector raw = params_.tail(arch_.output_dim);
  const Vector ls = log_std();
  const Vector inv_var = (-2.0 * ls).array().exp();
  Matrix upstream(out.rows(), n);
  Vector ls_grad = Vector::Zero(ls.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector diff = actions.values.col(j) - out.col(j);
    upstream.col(j) = weights[j] * diff.cwiseProduct(inv_var);
    ls_grad += weights[j] * (diff.cwiseProduct(diff).cwiseProduct(inv_var).array() - 1.0).matrix();
  }
  grad.head(net_params()) = net_.backward(net_view(), cache, upstream);
  for (Eigen::Index i = 0; i < ls.size(); ++i)
    grad[net_params() + i] = (raw[i] < log_std_min_ || raw[i] > log_std_max_) ? 0.0 : ls_grad[i];
  return grad;
}

double Policy::mean_kl(const Policy& old, const Matrix& features) const {
  if (old.kind_ != kind_ || old.params_.size() != params_.size())
    throw std::invalid_argument("mean_kl requires policies of the same architecture");
  const auto n = features.cols();
  if (n == 0) return 0.0;
  const Matrix out_new = outputs(features, nullptr);
  const Matrix out_old = old.outputs(features, nullptr);
  double total = 0.0;
  if (kind_ == HeadKind::CategoricalPolicy) {
    const Matrix p_new = softmax_columns(out_new);
    const Matrix p_old = softmax_columns(out_old);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < p_old.rows(); ++i)
        if (p_old(i, j) > 0.0) total += p_old(i, j) * (std::log(p_old(i, j)) - std::log(p_new(i, j)));
    return std::max(0.0, total / static_cast<double>(n));
  }
  const Vector ls_new = log_std();
  const Vector ls_old = old.log_std();
  const Vector var_new = (2.0 * ls_new).array().exp();
  const Vector var_old = (2.0 * ls_old).array().exp();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector diff = out_old.col(j) - out_new.col(j);
    total += (ls_new - ls_old).sum() +
             ((var_old + diff.cwiseProduct(diff)).array() / (2.0 * var_new.array()) - 0.5).sum();
  }
  return std::max(0.0, total / static_cast<double>(n));
}

Vector Policy::mean_kl_grad(const Policy& old, const Matrix& features) const {
  const auto n = features.cols();
  Vector grad = Vector::Zero(params_.size());
  if (n == 0) return grad;
  Mlp::Cache cache;
  const Matrix out_new = outputs(features, &cache);
  const Matrix out_old = old.outputs(features, nullptr);
  const double inv_n = 1.0 / static_cast<double>(n);
  if (kind_ == HeadKind::CategoricalPolicy) {
    const Matrix upstream = (softmax_columns(out_new) - softmax_columns(out_old)) * inv_n;
    grad.head(net_params()) = net_.backward(net_view(), cache, upstream);
    return grad;
  }
  const Vector raw = params_.tail(arch_.output_dim);
  const Vector var_new = (2.0 * log_std()).array().exp();
  const Vector var_old = (2.0 * old.log_std()).array().exp();
  Matrix upstream(out_new.rows(), n);
  Vector ls_grad = Vector::Zero(var_new.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector diff = out_new.col(j) - out_old.col(j);
    upstream.col(j) = diff.cwiseQuotient(var_new) * inv_n;
    ls_grad += (1.0 - (var_old + diff.cwiseProduct(diff)).array() / var_new.array()).matrix() * inv_n;
  }
  grad.head(net_params()) = net_.backward(net_view(), cache, upstream);
  for (Eigen::Index i = 0; i < ls_grad.size(); ++i)
    grad[net_params() + i] = (raw[i] < log_std_min_ || raw[i] > log_std_max_) ? 0.0 : ls_grad[i];
  return grad;
}

Vector Policy::fisher_vector_product(const Matrix& features, const Vector& v, double damping) const {
  if (v.size() != params_.size()) throw std::invalid_argument("FVP vector has wrong size");
  const auto n = features.cols();
  Vector result = damping * v;
  if (n == 0) return result;
  Mlp::Cache cache;
  const Matrix out = outputs(features, &cache);
  const Matrix t = net_.jvp(net_view(), cache, v.head(net_params()));
  const double inv_n = 1.0 / static_cast<double>(n);
  if (kind_ == HeadKind::CategoricalPolicy) {
    const Matrix p = softmax_columns(out);
    Matrix upstream(p.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double pt = p.col(j).dot(t.col(j));
      upstream.col(j) = (p.col(j).cwiseProduct(t.col(j)) - p.col(j) * pt) * inv_n;
    }
    result.head(net_params()) += net_.backward(net_view(), cache, upstream);
    return result;
  }
  const Vector raw = params_.tail(arch_.output_dim);
  const Vector inv_var = (-2.0 * log_std()).array().exp();
  const Matrix upstream = (inv_var.asDiagonal() * t) * inv_n;
  result.head(net_params()) += net_.backward(net_view(), cache, upstream);
  for (Eigen::Index i = 0; i < inv_var.size(); ++i)
    if (!(raw[i] < log_std_min_ || raw[i] > log_std_max_)) result[net_params() + i] += 2.0 * v[net_params() + i];
  return result;
}

}  // namespace varcpo
