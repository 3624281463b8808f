#pragma once

#include "mgmc/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgmc {

template <typename Scalar = double>
struct Interval {
  Scalar lower;
  Scalar upper;

  Scalar length() const { return upper - lower; }
  bool contains(Scalar x) const { return x >= lower && x <= upper; }
};

/// Sub-level set {x : U(x) <= H} of a 1D potential, as ordered disjoint
/// intervals. Empty when H is below the global minimum.
template <typename Scalar = double>
using SliceSet = std::vector<Interval<Scalar>>;

/// A potential energy U(x) = -log f(x) with its gradient and support box.
/// Targets are immutable once built; every member is safe to read
/// concurrently.
template <typename Scalar = double>
class Target {
 public:
  using PotentialFn = std::function<Scalar(const VectorRef<Scalar>&)>;
  using GradientFn = std::function<Vector<Scalar>(const VectorRef<Scalar>&)>;
  using SliceFn = std::function<SliceSet<Scalar>(Scalar)>;

  Target(std::string name, int dim, PotentialFn potential, GradientFn gradient)
      : name_(std::move(name)),
        dim_(dim),
        potential_(std::move(potential)),
        gradient_(std::move(gradient)),
        lower_(Vector<Scalar>::Constant(dim, -std::numeric_limits<Scalar>::infinity())),
        upper_(Vector<Scalar>::Constant(dim, std::numeric_limits<Scalar>::infinity())) {
    if (dim_ < 1) throw std::invalid_argument("Target: dimension must be >= 1");
  }

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }

  /// +inf outside the support.
  Scalar potential(const VectorRef<Scalar>& x) const {
    if (!in_support(x)) return std::numeric_limits<Scalar>::infinity();
    return potential_(x);
  }
  Scalar potential(Scalar x) const { return potential(VectorRef<Scalar>(scalar_view(x))); }

  Vector<Scalar> gradient(const VectorRef<Scalar>& x) const {
    check_dim(x);
    return gradient_(x);
  }
  Scalar gradient(Scalar x) const { return gradient(VectorRef<Scalar>(scalar_view(x)))(0); }

  bool in_support(const VectorRef<Scalar>& x) const {
    check_dim(x);
    return (x.array() >= lower_.array()).all() && (x.array() <= upper_.array()).all() &&
           x.allFinite();
  }
  bool in_support(Scalar x) const { return in_support(VectorRef<Scalar>(scalar_view(x))); }

  const Vector<Scalar>& lower_bounds() const { return lower_; }
  const Vector<Scalar>& upper_bounds() const { return upper_; }

  bool has_slice_interval() const { return static_cast<bool>(slice_); }

  SliceSet<Scalar> slice_interval(Scalar level) const {
    if (!slice_) throw std::logic_error("target '" + name_ + "' has no analytic slice interval");
    return slice_(level);
  }

  /// Local minima of a 1D potential (used to bound U on a slice).
  const std::vector<Scalar>& local_minima() const { return minima_; }

  /// Smallest U over a closed interval, from the endpoints and interior minima.
  Scalar minimum_on(const Interval<Scalar>& iv) const {
    Scalar best = std::min(potential(iv.lower), potential(iv.upper));
    for (Scalar m : minima_) {
      if (iv.contains(m)) best = std::min(best, potential(m));
    }
    return best;
  }

  /// Direction whose sign separates the modes of a symmetric bimodal target.
  const std::optional<Vector<Scalar>>& mode_axis() const { return mode_axis_; }

  /// Point about which the 1D potential is mirror-symmetric, if any.
  const std::optional<Scalar>& symmetry_center() const { return symmetry_center_; }

  Target& with_bounds(Vector<Scalar> lower, Vector<Scalar> upper) {
    if (lower.size() != dim_ || upper.size() != dim_) {
      throw std::invalid_argument("Target: bounds dimension mismatch");
    }
    lower_ = std::move(lower);
    upper_ = std::move(upper);
    return *this;
  }
  Target& with_slice(SliceFn slice, std::vector<Scalar> minima) {
    slice_ = std::move(slice);
    minima_ = std::move(minima);
    return *this;
  }
  Target& with_mode_axis(Vector<Scalar> axis) {
    mode_axis_ = std::move(axis);
    return *this;
  }
  Target& with_symmetry_center(Scalar c) {
    symmetry_center_ = c;
    return *this;
  }

 private:
  static Eigen::Map<const Vector<Scalar>> scalar_view(const Scalar& x) {
    return Eigen::Map<const Vector<Scalar>>(&x, 1);
  }

  void check_dim(const VectorRef<Scalar>& x) const {
    if (x.size() != dim_) {
      throw std::invalid_argument("target '" + name_ + "': expected dimension " +
                                  std::to_string(dim_) + ", got " + std::to_string(x.size()));
    }
  }

  std::string name_;
  int dim_;
  PotentialFn potential_;
  GradientFn gradient_;
  SliceFn slice_;
  std::vector<Scalar> minima_;
  Vector<Scalar> lower_;
  Vector<Scalar> upper_;
  std::optional<Vector<Scalar>> mode_axis_;
  std::optional<Scalar> symmetry_center_;
};

namespace detail {

template <typename Scalar>
Vector<Scalar> scalar_vector(Scalar v) {
  return Vector<Scalar>::Constant(1, v);
}

template <typename Scalar>
void require_positive(Scalar v, const char* what) {
  if (!(v > 0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

/// Root of a monotone function on [lo, hi] with sign(f(lo)) != sign(f(hi)),
/// to the given relative width.
template <typename Scalar, typename F>
Scalar bisect(F f, Scalar lo, Scalar hi, Scalar rel_tol) {
  Scalar f_lo = f(lo);
  for (int iter = 0; iter < 2000; ++iter) {
    const Scalar mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    const Scalar f_mid = f(mid);
    if ((f_mid > 0) == (f_lo > 0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= rel_tol * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return lo + (hi - lo) / 2;
}

}  // namespace detail

/// U(x) = x / theta on [0, inf).
template <typename Scalar = double>
Target<Scalar> exponential_target(Scalar theta) {
  detail::require_positive(theta, "exponential_target: theta");
  Target<Scalar> t(
      "exponential", 1, [theta](const VectorRef<Scalar>& x) { return x(0) / theta; },
      [theta](const VectorRef<Scalar>&) { return detail::scalar_vector<Scalar>(1 / theta); });
  t.with_bounds(detail::scalar_vector<Scalar>(0),
                detail::scalar_vector(std::numeric_limits<Scalar>::infinity()));
  t.with_slice(
      [theta](Scalar level) -> SliceSet<Scalar> {
        if (!(level >= 0)) return {};
        return {{Scalar(0), theta * level}};
      },
      {Scalar(0)});
  return t;
}

/// U(x) = theta x^2 on [0, inf).
template <typename Scalar = double>
Target<Scalar> truncated_gaussian_target(Scalar theta) {
  detail::require_positive(theta, "truncated_gaussian_target: theta");
  Target<Scalar> t(
      "truncated_gaussian", 1,
      [theta](const VectorRef<Scalar>& x) { return theta * x(0) * x(0); },
      [theta](const VectorRef<Scalar>& x) { return detail::scalar_vector<Scalar>(2 * theta * x(0)); });
  t.with_bounds(detail::scalar_vector<Scalar>(0),
                detail::scalar_vector(std::numeric_limits<Scalar>::infinity()));
  t.with_slice(
      [theta](Scalar level) -> SliceSet<Scalar> {
        if (!(level >= 0)) return {};
        return {{Scalar(0), std::sqrt(level / theta)}};
      },
      {Scalar(0)});
  return t;
}

/// U(x) = -(r - 1) log x + theta x on (0, inf). Requires r > 1 so the
/// density is bounded and the slice is a single bracketed interval.
template <typename Scalar = double>
Target<Scalar> gamma_target(Scalar r, Scalar theta) {
  detail::require_positive(theta, "gamma_target: theta");
  if (!(r > 1) || !std::isfinite(r)) throw std::invalid_argument("gamma_target: r must be > 1");
  auto u = [r, theta](Scalar x) { return -(r - 1) * std::log(x) + theta * x; };
  Target<Scalar> t(
      "gamma", 1, [u](const VectorRef<Scalar>& x) { return u(x(0)); },
      [r, theta](const VectorRef<Scalar>& x) {
        return detail::scalar_vector<Scalar>(-(r - 1) / x(0) + theta);
      });
  // The closed lower bound is 0, where U = +inf, so in_support(0) is true but
  // the potential there is infinite, which every caller treats as rejection.
  t.with_bounds(detail::scalar_vector<Scalar>(0),
                detail::scalar_vector(std::numeric_limits<Scalar>::infinity()));
  const Scalar mode = (r - 1) / theta;
  t.with_slice(
      [u, mode](Scalar level) -> SliceSet<Scalar> {
        const Scalar u_min = u(mode);
        if (!(level >= u_min)) return {};
        if (level == u_min) return {{mode, mode}};
        auto excess = [&](Scalar x) { return u(x) - level; };
        constexpr Scalar tol = Scalar(1e-12);
        Scalar lo = mode / 2;
        while (excess(lo) <= 0) lo /= 2;
        Scalar hi = mode * 2;
        while (excess(hi) <= 0) hi *= 2;
        const Scalar left = detail::bisect<Scalar>(excess, lo, mode, tol);
        const Scalar right = detail::bisect<Scalar>(excess, mode, hi, tol);
        return {{left, right}};
      },
      {mode});
  return t;
}

/// U(x) = x^4 - 2 x^2, modes at +-1 with U = -1, barrier U(0) = 0.
template <typename Scalar = double>
Target<Scalar> bimodal_1d_target() {
  Target<Scalar> t(
      "bimodal_1d", 1,
      [](const VectorRef<Scalar>& x) {
        const Scalar z = x(0) * x(0);
        return z * z - 2 * z;
      },
      [](const VectorRef<Scalar>& x) {
        return detail::scalar_vector<Scalar>(4 * x(0) * x(0) * x(0) - 4 * x(0));
      });
  // In z = x^2: z^2 - 2z - H <= 0  <=>  z in [1 - s, 1 + s], s = sqrt(1 + H).
  t.with_slice(
      [](Scalar level) -> SliceSet<Scalar> {
        if (!(level >= -1)) return {};
        const Scalar s = std::sqrt(1 + level);
        const Scalar z_hi = 1 + s;
        const Scalar x_hi = std::sqrt(z_hi);
        if (level >= 0) return {{-x_hi, x_hi}};
        // 1 - s without cancellation
        const Scalar z_lo = -level / (1 + s);
        const Scalar x_lo = std::sqrt(z_lo);
        return {{-x_hi, -x_lo}, {x_lo, x_hi}};
      },
      {Scalar(-1), Scalar(1)});
  t.with_mode_axis(detail::scalar_vector<Scalar>(1));
  t.with_symmetry_center(Scalar(0));
  return t;
}

/// Sign of the (x1 - x2)^2 term of the 2D quartic. As printed the term is
/// negative, which leaves exp(-U) non-integrable along x1 = -x2; the
/// default flips it so the target is a proper bimodal density.
enum class DifferenceTerm { as_printed, integrable };

inline const char* to_string(DifferenceTerm term) {
  return term == DifferenceTerm::as_printed ? "as_printed" : "integrable";
}

/// U(x) = -0.2 s^2 + 0.01 s^4 + c d^2 with s = x1 + x2, d = x1 - x2 and
/// c = +0.4 (integrable) or -0.4 (as printed).
template <typename Scalar = double>
Target<Scalar> bimodal_2d_target(DifferenceTerm term = DifferenceTerm::integrable) {
  const Scalar c = term == DifferenceTerm::integrable ? Scalar(0.4) : Scalar(-0.4);
  Target<Scalar> t(
      "bimodal_2d", 2,
      [c](const VectorRef<Scalar>& x) {
        const Scalar s = x(0) + x(1);
        const Scalar d = x(0) - x(1);
        return Scalar(-0.2) * s * s + Scalar(0.01) * s * s * s * s + c * d * d;
      },
      [c](const VectorRef<Scalar>& x) {
        const Scalar s = x(0) + x(1);
        const Scalar d = x(0) - x(1);
        const Scalar du_ds = Scalar(-0.4) * s + Scalar(0.04) * s * s * s;
        const Scalar du_dd = 2 * c * d;
        Vector<Scalar> g(2);
        g << du_ds + du_dd, du_ds - du_dd;
        return g;
      });
  Vector<Scalar> axis(2);
  axis << Scalar(0.5), Scalar(0.5);
  t.with_mode_axis(axis);
  return t;
}

}  // namespace mgmc
