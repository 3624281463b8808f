#pragma once

#include "mgmc/integrator.hpp"
#include "mgmc/kinetics.hpp"
#include "mgmc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgmc {

enum class SamplerKind { mg_hmc, mg_ss_analytic, mg_hmc_analytic, std_slice };

inline const char* to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::mg_hmc: return "mg_hmc";
    case SamplerKind::mg_ss_analytic: return "mg_ss_analytic";
    case SamplerKind::mg_hmc_analytic: return "mg_hmc_analytic";
    case SamplerKind::std_slice: return "std_slice";
  }
  return "unknown";
}

inline SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "mg_hmc") return SamplerKind::mg_hmc;
  if (name == "mg_ss_analytic") return SamplerKind::mg_ss_analytic;
  if (name == "mg_hmc_analytic") return SamplerKind::mg_hmc_analytic;
  if (name == "std_slice") return SamplerKind::std_slice;
  throw std::invalid_argument("unknown sampler kind '" + name + "'");
}

template <typename Scalar = double>
struct SliceConfig {
  Scalar width = Scalar(1);
  int max_doublings = 10;
};

template <typename Scalar = double>
struct SamplerConfig {
  SamplerKind kind = SamplerKind::mg_hmc;
  KineticParams<Scalar> kinetic{Scalar(0.5), Scalar(1)};
  IntegratorConfig<Scalar> integrator{};
  SliceConfig<Scalar> slice{};
  long iterations = 1000;
  long burn_in = 0;
  std::uint64_t seed = 1;
  Vector<Scalar> initial_position;
  /// mg_hmc_analytic only: restrict the conditional draw to the connected
  /// piece of the slice holding the current point.
  bool confine_to_component = true;

  void validate(const Target<Scalar>& target) const {
    if (iterations < 1) throw std::invalid_argument("SamplerConfig: iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations) {
      throw std::invalid_argument("SamplerConfig: need 0 <= burn_in < iterations");
    }
    if (initial_position.size() != target.dim()) {
      throw std::invalid_argument("SamplerConfig: initial position has dimension " +
                                  std::to_string(initial_position.size()) + ", target has " +
                                  std::to_string(target.dim()));
    }
    if (!std::isfinite(target.potential(initial_position))) {
      throw std::invalid_argument("SamplerConfig: initial position outside the support of '" +
                                  target.name() + "'");
    }
    const bool analytic = kind == SamplerKind::mg_ss_analytic || kind == SamplerKind::mg_hmc_analytic;
    if (analytic && (target.dim() != 1 || !target.has_slice_interval())) {
      throw std::invalid_argument(std::string(to_string(kind)) +
                                  " needs a 1D target with an analytic slice interval");
    }
    if (kind == SamplerKind::mg_hmc) integrator.validate();
    if (kind == SamplerKind::std_slice) {
      if (!(slice.width > 0)) throw std::invalid_argument("SamplerConfig: slice width must be positive");
      if (slice.max_doublings < 0) throw std::invalid_argument("SamplerConfig: max_doublings must be >= 0");
    }
  }
};

template <typename Scalar = double>
struct Trace {
  /// Retained positions, one row per post burn-in iteration.
  Matrix<Scalar> samples;
  /// One entry per iteration, burn-in included.
  std::vector<std::uint8_t> accepted;
  std::vector<Scalar> hamiltonians;
  /// log y_t of the slice variable (slice kinds only), per iteration.
  std::vector<Scalar> slice_levels;
  long burn_in = 0;
  long divergences = 0;
  long recoils = 0;
  long boundary_reflections = 0;
  long singular_gradients = 0;
  long doubling_cap_hits = 0;

  long iterations() const { return static_cast<long>(accepted.size()); }
  long retained() const { return static_cast<long>(samples.rows()); }

  /// Acceptance over retained iterations.
  double acceptance_rate() const {
    if (accepted.size() <= static_cast<std::size_t>(burn_in)) return 0;
    const auto first = accepted.begin() + burn_in;
    const long hits = std::count(first, accepted.end(), std::uint8_t{1});
    return static_cast<double>(hits) / static_cast<double>(accepted.end() - first);
  }

  Vector<Scalar> column(Eigen::Index d) const { return samples.col(d); }
};

namespace detail {

template <typename Scalar>
Trace<Scalar> start_trace(const Target<Scalar>& target, const SamplerConfig<Scalar>& config,
                          bool slice_kind) {
  Trace<Scalar> trace;
  trace.burn_in = config.burn_in;
  trace.samples.resize(config.iterations - config.burn_in, target.dim());
  trace.accepted.reserve(static_cast<std::size_t>(config.iterations));
  trace.hamiltonians.reserve(static_cast<std::size_t>(config.iterations));
  if (slice_kind) trace.slice_levels.reserve(static_cast<std::size_t>(config.iterations));
  return trace;
}

template <typename Scalar>
void record(Trace<Scalar>& trace, long iteration, const VectorRef<Scalar>& x) {
  if (iteration >= trace.burn_in) trace.samples.row(iteration - trace.burn_in) = x.transpose();
}

/// Inverse-CDF tables for a < 1. The density (H - U(x))^(a-1) blows up
/// where U reaches H, so each interval is parametrized by
/// x = L + (R - L) B(t) with B(t) = t^k / (t^k + (1-t)^k); B' ~ t^(k-1) at
/// both ends cancels the singularity for k ~ 1/a and the integrand in t is
/// bounded. B and B' at the cell centres depend only on a and are built
/// once per chain.
template <typename Scalar>
class SingularGrid {
 public:
  static constexpr int cells = 4096;

  explicit SingularGrid(Scalar a)
      : a_(a), shape_(cells), jacobian_(cells) {
    const Scalar k = std::clamp(1 / a, Scalar(1), Scalar(3));
    for (int i = 0; i < cells; ++i) {
      const Scalar t = (i + Scalar(0.5)) / cells;
      const Scalar lt = std::pow(t, k);
      const Scalar rt = std::pow(1 - t, k);
      const Scalar den = lt + rt;
      shape_[static_cast<std::size_t>(i)] = lt / den;
      jacobian_[static_cast<std::size_t>(i)] = k * std::pow(t, k - 1) * std::pow(1 - t, k - 1) / (den * den);
    }
  }

  Scalar a() const { return a_; }

  /// Tabulates the unnormalized CDF over cells of `iv` at level H and
  /// returns the interval's mass.
  Scalar tabulate(const Target<Scalar>& target, Scalar level, const Interval<Scalar>& iv,
                  std::vector<Scalar>& cdf) const {
    cdf.resize(cells + 1);
    const Scalar width = iv.length();
    cdf[0] = 0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(cells); ++i) {
      const Scalar gap = level - target.potential(at(iv, i));
      Scalar w = 0;
      if (gap > 0 && std::isfinite(gap)) {
        w = (a_ == Scalar(0.5) ? 1 / std::sqrt(gap) : std::pow(gap, a_ - 1)) * width * jacobian_[i];
      }
      cdf[i + 1] = cdf[i] + w / cells;
    }
    return cdf.back();
  }

  Scalar draw(const Interval<Scalar>& iv, const std::vector<Scalar>& cdf, Rng& rng) const {
    const Scalar u = uniform01<Scalar>(rng) * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto cell = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cdf.begin() - 1, 0, cells - 1));
    // uniform within the cell in t, linearized map
    const Scalar frac = uniform01<Scalar>(rng) - Scalar(0.5);
    const Scalar x = at(iv, cell) + iv.length() * jacobian_[cell] * frac / cells;
    return std::clamp(x, iv.lower, iv.upper);
  }

  /// Draw from (H - U)^(a-1) across all pieces of the slice.
  Scalar draw(const Target<Scalar>& target, const SliceSet<Scalar>& slice, Scalar level, Rng& rng) {
    masses_.assign(slice.size(), Scalar(0));
    tables_.resize(slice.size());
    Scalar total = 0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
      masses_[i] = tabulate(target, level, slice[i], tables_[i]);
      total += masses_[i];
    }
    // degenerate slice (level at the minimum): every piece has zero width
    if (!(total > 0)) return slice.front().lower;
    Scalar u = uniform01<Scalar>(rng) * total;
    std::size_t i = 0;
    while (i + 1 < slice.size() && u >= masses_[i]) u -= masses_[i++];
    return draw(slice[i], tables_[i], rng);
  }

 private:
  Scalar at(const Interval<Scalar>& iv, std::size_t cell) const {
    return std::clamp(iv.lower + iv.length() * shape_[cell], iv.lower, iv.upper);
  }

  Scalar a_;
  std::vector<Scalar> shape_;
  std::vector<Scalar> jacobian_;
  std::vector<Scalar> masses_;
  std::vector<std::vector<Scalar>> tables_;
};

}  // namespace detail

/// Draws x from the density proportional to (H - U(x))^(a-1) on the given
/// slice pieces. a >= 1 uses rejection from a length-weighted uniform
/// proposal; a < 1 uses a per-interval inverse CDF.
template <typename Scalar>
Scalar conditional_draw(const Target<Scalar>& target, const SliceSet<Scalar>& slice, Scalar level,
                        const KineticParams<Scalar>& params, Rng& rng,
                        detail::SingularGrid<Scalar>* grid = nullptr) {
  if (slice.empty()) {
    std::ostringstream msg;
    msg << "conditional_draw: empty slice at H=" << level << " on '" << target.name() << "'";
    throw std::runtime_error(msg.str());
  }
  const Scalar a = params.a();
  if (a >= 1) {
    std::vector<Scalar> lengths;
    lengths.reserve(slice.size());
    Scalar u_min = std::numeric_limits<Scalar>::infinity();
    for (const auto& iv : slice) {
      lengths.push_back(iv.length());
      u_min = std::min(u_min, target.minimum_on(iv));
    }
    const Scalar total = std::accumulate(lengths.begin(), lengths.end(), Scalar(0));
    if (!(total > 0)) return slice.front().lower;
    const Scalar top = level - u_min;
    constexpr long max_attempts = 1000000;
    for (long attempt = 0; attempt < max_attempts; ++attempt) {
      Scalar u = uniform01<Scalar>(rng) * total;
      std::size_t i = 0;
      while (i + 1 < slice.size() && u >= lengths[i]) u -= lengths[i++];
      const Scalar x = std::min(slice[i].lower + u, slice[i].upper);
      if (a == 1) return x;
      const Scalar gap = level - target.potential(x);
      if (!(gap > 0)) continue;
      if (uniform01<Scalar>(rng) < std::pow(gap / top, a - 1)) return x;
    }
    std::ostringstream msg;
    msg << "conditional_draw: rejection sampler exhausted " << max_attempts
        << " attempts at H=" << level << ", a=" << a;
    throw std::runtime_error(msg.str());
  }

  if (grid && grid->a() == a) return grid->draw(target, slice, level, rng);
  detail::SingularGrid<Scalar> local(a);
  return local.draw(target, slice, level, rng);
}

template <typename Scalar>
Scalar conditional_draw(const Target<Scalar>& target, Scalar level,
                        const KineticParams<Scalar>& params, Rng& rng) {
  return conditional_draw(target, target.slice_interval(level), level, params, rng);
}

/// The connected piece of `slice` holding x (or the nearest one, for an x
/// that sits on a rounded endpoint).
template <typename Scalar>
SliceSet<Scalar> component_containing(const SliceSet<Scalar>& slice, Scalar x) {
  if (slice.empty()) return {};
  std::size_t best = 0;
  Scalar best_dist = std::numeric_limits<Scalar>::infinity();
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const Scalar dist = slice[i].contains(x) ? Scalar(0)
                                             : std::min(std::abs(x - slice[i].lower), std::abs(x - slice[i].upper));
    if (dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return {slice[best]};
}

namespace detail {

/// Shared driver for the two exact 1D samplers. Each iteration draws
/// g ~ Gamma(a, 1) and sets H = U(x) + g (equivalently y = f(x) e^-g),
/// then draws x from (H - U)^(a-1) on the slice, or on the piece of the
/// slice holding x when `confine`.
template <typename Scalar>
Trace<Scalar> run_analytic(const Target<Scalar>& target, const SamplerConfig<Scalar>& config,
                           bool confine) {
  config.validate(target);
  Rng rng(config.seed);
  Trace<Scalar> trace = start_trace(target, config, true);
  std::gamma_distribution<Scalar> gamma(config.kinetic.a(), Scalar(1));
  std::optional<SingularGrid<Scalar>> grid;
  if (config.kinetic.a() < 1) grid.emplace(config.kinetic.a());
  Scalar x = config.initial_position(0);
  Scalar u = target.potential(x);
  for (long it = 0; it < config.iterations; ++it) {
    const Scalar level = u + gamma(rng);
    SliceSet<Scalar> slice = target.slice_interval(level);
    if (confine) slice = component_containing(slice, x);
    x = conditional_draw(target, slice, level, config.kinetic, rng, grid ? &*grid : nullptr);
    u = target.potential(x);
    trace.accepted.push_back(1);
    trace.hamiltonians.push_back(level);
    trace.slice_levels.push_back(-level);
    record<Scalar>(trace, it, Vector<Scalar>::Constant(1, x));
  }
  return trace;
}

}  // namespace detail

/// Exact MG slice sampler for 1D targets with an analytic slice.
template <typename Scalar>
Trace<Scalar> run_mg_ss_analytic(const Target<Scalar>& target, SamplerConfig<Scalar> config) {
  config.kind = SamplerKind::mg_ss_analytic;
  return detail::run_analytic(target, config, false);
}

/// Exact MG-HMC for 1D targets: the Hamiltonian-level draw of the slice
/// sampler, but (by default) confined to the closed orbit through x_t.
template <typename Scalar>
Trace<Scalar> run_mg_hmc_analytic(const Target<Scalar>& target, SamplerConfig<Scalar> config) {
  config.kind = SamplerKind::mg_hmc_analytic;
  return detail::run_analytic(target, config, config.confine_to_component);
}

/// MG-HMC with the numerical integrator: resample p ~ MG(a, m), integrate,
/// MH-correct on H = U + K.
template <typename Scalar>
Trace<Scalar> run_mg_hmc(const Target<Scalar>& target, SamplerConfig<Scalar> config) {
  config.kind = SamplerKind::mg_hmc;
  config.validate(target);
  Rng rng(config.seed);
  Trace<Scalar> trace = detail::start_trace(target, config, false);
  const int dim = target.dim();
  PhasePoint<Scalar> current =
      make_phase_point<Scalar>(config.initial_position, Vector<Scalar>::Zero(dim), target, config.kinetic);
  for (long it = 0; it < config.iterations; ++it) {
    current.momentum = sample_mg(config.kinetic, dim, rng);
    current.kinetic = kinetic_energy<Scalar>(current.momentum, config.kinetic);
    auto traj = propose_trajectory(current, target, config.kinetic, config.integrator, it, rng);
    trace.recoils += traj.stats.recoils;
    trace.boundary_reflections += traj.stats.boundary_reflections;
    trace.singular_gradients += traj.stats.singular_gradients;

    bool accept = false;
    const Scalar dh = traj.end.hamiltonian() - current.hamiltonian();
    if (traj.end.valid && std::isfinite(dh) && std::abs(dh) > config.integrator.divergence_threshold) {
      ++trace.divergences;
      // consume the uniform anyway so the stream does not depend on the guard
      (void)uniform01<Scalar>(rng);
    } else {
      accept = mh_accept(current, traj.end, rng);
    }
    if (accept) current = std::move(traj.end);
    trace.accepted.push_back(accept ? 1 : 0);
    trace.hamiltonians.push_back(current.hamiltonian());
    detail::record<Scalar>(trace, it, current.position);
  }
  return trace;
}

namespace detail {

template <typename Scalar>
struct CoordinateSlice {
  const Target<Scalar>& target;
  Vector<Scalar>& x;
  Eigen::Index d;

  Scalar log_f(Scalar v) const {
    const Scalar saved = x(d);
    x(d) = v;
    const Scalar u = target.potential(x);
    x(d) = saved;
    return -u;
  }
};

/// Neal's doubling-interval acceptability test.
template <typename Scalar>
bool doubling_acceptable(const CoordinateSlice<Scalar>& f, Scalar x0, Scalar x1, Scalar log_y,
                         Scalar left, Scalar right, Scalar width) {
  bool differ = false;
  while (right - left > Scalar(1.1) * width) {
    const Scalar mid = (left + right) / 2;
    if ((x0 < mid && x1 >= mid) || (x0 >= mid && x1 < mid)) differ = true;
    if (x1 < mid) {
      right = mid;
    } else {
      left = mid;
    }
    if (differ && log_y >= f.log_f(left) && log_y >= f.log_f(right)) return false;
  }
  return true;
}

/// One univariate doubling + shrinkage update of coordinate d.
template <typename Scalar>
void slice_update(const Target<Scalar>& target, Vector<Scalar>& x, Eigen::Index d,
                  const SliceConfig<Scalar>& cfg, Rng& rng, Scalar& log_y_out, long& cap_hits) {
  CoordinateSlice<Scalar> f{target, x, d};
  const Scalar x0 = x(d);
  const Scalar log_f0 = f.log_f(x0);
  const Scalar log_y = log_f0 - std::exponential_distribution<Scalar>(1)(rng);
  log_y_out = log_y;

  Scalar left = x0 - cfg.width * uniform01<Scalar>(rng);
  Scalar right = left + cfg.width;
  int k = cfg.max_doublings;
  Scalar f_left = f.log_f(left);
  Scalar f_right = f.log_f(right);
  while (k > 0 && (log_y < f_left || log_y < f_right)) {
    if (uniform01<Scalar>(rng) < Scalar(0.5)) {
      left -= right - left;
      f_left = f.log_f(left);
    } else {
      right += right - left;
      f_right = f.log_f(right);
    }
    --k;
  }
  if (k == 0 && (log_y < f_left || log_y < f_right)) ++cap_hits;

  const Scalar left0 = left;
  const Scalar right0 = right;
  for (long attempt = 0; attempt < 100000; ++attempt) {
    const Scalar x1 = left + uniform01<Scalar>(rng) * (right - left);
    if (log_y < f.log_f(x1) &&
        doubling_acceptable(f, x0, x1, log_y, left0, right0, cfg.width)) {
      x(d) = x1;
      return;
    }
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  throw std::runtime_error("std_slice: shrinkage failed to find a point on the slice");
}

}  // namespace detail

/// Univariate slice sampling with stepping-out by doubling and shrinkage.
/// Multivariate targets are updated one coordinate at a time in a random
/// order each sweep.
template <typename Scalar>
Trace<Scalar> run_std_slice(const Target<Scalar>& target, SamplerConfig<Scalar> config) {
  config.kind = SamplerKind::std_slice;
  config.validate(target);
  Rng rng(config.seed);
  Trace<Scalar> trace = detail::start_trace(target, config, true);
  Vector<Scalar> x = config.initial_position;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(target.dim()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (long it = 0; it < config.iterations; ++it) {
    if (order.size() > 1) std::shuffle(order.begin(), order.end(), rng);
    Scalar log_y = 0;
    for (Eigen::Index d : order) {
      detail::slice_update(target, x, d, config.slice, rng, log_y, trace.doubling_cap_hits);
    }
    trace.accepted.push_back(1);
    trace.hamiltonians.push_back(target.potential(x));
    trace.slice_levels.push_back(log_y);
    detail::record<Scalar>(trace, it, x);
  }
  return trace;
}

template <typename Scalar>
Trace<Scalar> run_sampler(const Target<Scalar>& target, const SamplerConfig<Scalar>& config) {
  switch (config.kind) {
    case SamplerKind::mg_hmc: return run_mg_hmc(target, config);
    case SamplerKind::mg_ss_analytic: return run_mg_ss_analytic(target, config);
    case SamplerKind::mg_hmc_analytic: return run_mg_hmc_analytic(target, config);
    case SamplerKind::std_slice: return run_std_slice(target, config);
  }
  throw std::logic_error("run_sampler: unhandled sampler kind");
}

}  // namespace mgmc
