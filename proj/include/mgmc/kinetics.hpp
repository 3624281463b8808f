#pragma once

#include "mgmc/types.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace mgmc {

/// Monomial Gamma momentum law MG(a, m): density proportional to
/// exp(-|p|^(1/a) / m). a = 1/2 is Gaussian, a = 1 is Laplace.
template <typename Scalar = double>
class KineticParams {
 public:
  KineticParams(Scalar monomial, Scalar mass) : a_(monomial), m_(mass) {
    if (!(a_ > 0) || !(m_ > 0) || !std::isfinite(a_) || !std::isfinite(m_)) {
      throw std::invalid_argument("KineticParams: a and m must be positive and finite (a=" +
                                  std::to_string(static_cast<double>(a_)) +
                                  ", m=" + std::to_string(static_cast<double>(m_)) + ")");
    }
  }

  Scalar a() const { return a_; }
  Scalar m() const { return m_; }

 private:
  Scalar a_;
  Scalar m_;
};

/// Log of one coordinate of the MG(a, m) density.
template <typename Scalar>
Scalar mg_log_density(Scalar p, const KineticParams<Scalar>& params) {
  using std::abs;
  using std::log;
  using std::pow;
  const Scalar a = params.a();
  const Scalar m = params.m();
  return -std::numbers::ln2_v<Scalar> - a * log(m) - std::lgamma(a + 1) - pow(abs(p), 1 / a) / m;
}

template <typename Scalar>
Scalar kinetic_energy(const VectorRef<Scalar>& p, const KineticParams<Scalar>& params) {
  return p.array().abs().pow(1 / params.a()).sum() / params.m();
}

template <typename Scalar>
Scalar kinetic_energy(const Vector<Scalar>& p, const KineticParams<Scalar>& params) {
  return kinetic_energy<Scalar>(VectorRef<Scalar>(p), params);
}

/// Per-coordinate dK/dp. A zero coordinate maps to 0 for every a, including
/// a > 1 where the formula diverges; callers that care can test
/// `has_singular_gradient`.
template <typename Scalar>
Scalar kinetic_gradient(Scalar p, const KineticParams<Scalar>& params) {
  using std::abs;
  using std::pow;
  if (p == 0) return Scalar(0);
  const Scalar a = params.a();
  const Scalar m = params.m();
  const Scalar sign = p > 0 ? Scalar(1) : Scalar(-1);
  if (a == 1) return sign / m;
  return sign * pow(abs(p), 1 / a - 1) / (m * a);
}

template <typename Scalar>
Vector<Scalar> kinetic_gradient(const VectorRef<Scalar>& p, const KineticParams<Scalar>& params) {
  return p.unaryExpr([&](Scalar v) { return kinetic_gradient(v, params); });
}

template <typename Scalar>
Vector<Scalar> kinetic_gradient(const Vector<Scalar>& p, const KineticParams<Scalar>& params) {
  return kinetic_gradient<Scalar>(VectorRef<Scalar>(p), params);
}

template <typename Scalar>
bool has_singular_gradient(const VectorRef<Scalar>& p, const KineticParams<Scalar>& params) {
  return params.a() > 1 && (p.array() == 0).any();
}

/// Draws `dim` independent MG(a, m) coordinates as S * G^a with
/// G ~ Gamma(shape a, scale m) and S a fair sign.
template <typename Scalar>
Vector<Scalar> sample_mg(const KineticParams<Scalar>& params, int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("sample_mg: dim must be >= 1");
  std::gamma_distribution<Scalar> gamma(params.a(), params.m());
  std::bernoulli_distribution coin(0.5);
  Vector<Scalar> p(dim);
  for (int d = 0; d < dim; ++d) {
    const Scalar g = gamma(rng);
    const Scalar magnitude = std::pow(g, params.a());
    p(d) = coin(rng) ? magnitude : -magnitude;
  }
  return p;
}

}  // namespace mgmc
