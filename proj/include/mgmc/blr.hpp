#pragma once

#include "mgmc/dataset.hpp"
#include "mgmc/targets.hpp"

#include <cmath>
#include <memory>

namespace mgmc {

/// log(1 + exp(z)) without overflow for large |z|.
template <typename Scalar>
Scalar softplus(Scalar z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// 1 / (1 + exp(-z)), stable in both tails.
template <typename Scalar>
Scalar logistic(Scalar z) {
  if (z >= 0) return 1 / (1 + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (1 + e);
}

/// Posterior energy of Bayesian logistic regression with an isotropic
/// N(0, prior_variance I) prior:
///   U(beta) = sum_i log(1 + exp(-y_i <beta, x_i>)) + |beta|^2 / (2 prior_variance).
template <typename Scalar = double>
Target<Scalar> blr_target(const LabeledDataset& data, Scalar prior_variance = Scalar(100)) {
  detail::require_positive(prior_variance, "blr_target: prior_variance");
  const int dim = static_cast<int>(data.dim());
  if (dim < 1) throw std::invalid_argument("blr_target: dataset has no features");
  if (data.labels.size() != data.features.rows()) {
    throw std::invalid_argument("blr_target: label count does not match instance count");
  }
  // rows pre-multiplied by their label: margin_i = <beta, y_i x_i>
  auto signed_features = std::make_shared<const Matrix<Scalar>>(
      (data.labels.asDiagonal() * data.features).template cast<Scalar>());
  const Scalar inv_var = 1 / prior_variance;

  auto potential = [signed_features, inv_var](const VectorRef<Scalar>& beta) {
    if (beta.size() != signed_features->cols()) {
      throw std::invalid_argument("blr_target: coefficient dimension mismatch");
    }
    const Vector<Scalar> margins = (*signed_features) * beta;
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) loss += softplus(-margins(i));
    return loss + beta.squaredNorm() * inv_var / 2;
  };
  auto gradient = [signed_features, inv_var](const VectorRef<Scalar>& beta) {
    if (beta.size() != signed_features->cols()) {
      throw std::invalid_argument("blr_target: coefficient dimension mismatch");
    }
    const Vector<Scalar> margins = (*signed_features) * beta;
    const Vector<Scalar> weights = margins.unaryExpr([](Scalar m) { return logistic(-m); });
    Vector<Scalar> g = -(signed_features->transpose() * weights);
    g += beta * inv_var;
    return g;
  };
  return Target<Scalar>("blr_" + data.name, dim, potential, gradient);
}

}  // namespace mgmc
