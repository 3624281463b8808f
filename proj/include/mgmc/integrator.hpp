#pragma once

#include "mgmc/kinetics.hpp"
#include "mgmc/targets.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>

namespace mgmc {

template <typename Scalar = double>
struct IntegratorConfig {
  /// Floor of the step-size schedule (and the fixed step when decay is off).
  Scalar base_step = Scalar(0.1);
  /// Step-size range used when a == 1; unset means [0.5, 1.5] * base_step.
  std::optional<std::pair<Scalar, Scalar>> step_jitter_range;
  /// Decay schedule eps = max(decay_init * decay_rate^t, base_step).
  /// Disabled whenever decay_init <= base_step.
  Scalar decay_init = Scalar(0);
  Scalar decay_rate = Scalar(0.9);
  int leapfrog_center = 100;
  int leapfrog_halfwidth = 20;
  /// Momentum-sign recoil. Unset picks the default for the monomial
  /// parameter: on for a > 1, off otherwise.
  std::optional<bool> reflection_enabled;
  /// Mirror positions that leave a finite support box back inside.
  bool boundary_reflection = true;
  /// Proposals with |H_end - H_start| above this are rejected as divergent.
  Scalar divergence_threshold = Scalar(1e3);

  std::pair<Scalar, Scalar> jitter_range() const {
    if (step_jitter_range) return *step_jitter_range;
    return {base_step / 2, base_step * 3 / 2};
  }

  bool recoil_for(const KineticParams<Scalar>& params) const {
    return reflection_enabled.value_or(params.a() > 1);
  }

  void validate() const {
    if (!(base_step > 0) || !std::isfinite(base_step)) {
      throw std::invalid_argument("IntegratorConfig: base_step must be positive");
    }
    const auto [r1, r2] = jitter_range();
    if (!(r1 > 0) || !(r2 >= r1)) {
      throw std::invalid_argument("IntegratorConfig: step jitter range needs 0 < r1 <= r2");
    }
    if (decay_init > base_step && !(decay_rate > 0 && decay_rate < 1)) {
      throw std::invalid_argument("IntegratorConfig: decay_rate must lie in (0, 1)");
    }
    if (leapfrog_halfwidth < 0 || leapfrog_halfwidth >= leapfrog_center) {
      throw std::invalid_argument("IntegratorConfig: need 0 <= leapfrog_halfwidth < leapfrog_center");
    }
    if (!(divergence_threshold > 0)) {
      throw std::invalid_argument("IntegratorConfig: divergence_threshold must be positive");
    }
  }
};

/// A point in phase space together with its cached energies and potential
/// gradient. `valid` is false once the point has left the support.
template <typename Scalar = double>
struct PhasePoint {
  Vector<Scalar> position;
  Vector<Scalar> momentum;
  Scalar potential = 0;
  Scalar kinetic = 0;
  Vector<Scalar> potential_gradient;
  bool valid = true;

  Scalar hamiltonian() const {
    return valid ? potential + kinetic : std::numeric_limits<Scalar>::infinity();
  }
};

/// Evaluates potential, kinetic energy and gradient at (x, p).
template <typename Scalar>
PhasePoint<Scalar> make_phase_point(Vector<Scalar> position, Vector<Scalar> momentum,
                                    const Target<Scalar>& target,
                                    const KineticParams<Scalar>& params) {
  PhasePoint<Scalar> pt;
  pt.position = std::move(position);
  pt.momentum = std::move(momentum);
  pt.kinetic = kinetic_energy<Scalar>(pt.momentum, params);
  pt.potential = target.potential(pt.position);
  pt.valid = std::isfinite(pt.potential);
  if (pt.valid) pt.potential_gradient = target.gradient(pt.position);
  return pt;
}

struct StepStats {
  long recoils = 0;
  long boundary_reflections = 0;
  long singular_gradients = 0;
};

/// Per-coordinate recoil: wherever the momentum changed sign between
/// `before` and `after`, the coordinate is put back to before.position and
/// its momentum becomes -before.momentum. Energies of the result are
/// refreshed by the caller (see leapfrog_step); the result carries
/// before's energies when every coordinate recoiled and after's when none
/// did, NaN otherwise.
template <typename Scalar>
PhasePoint<Scalar> reflect_recoil(const PhasePoint<Scalar>& before, const PhasePoint<Scalar>& after,
                                  long* recoiled = nullptr) {
  if (before.position.size() != after.position.size() ||
      before.momentum.size() != after.momentum.size()) {
    throw std::invalid_argument("reflect_recoil: dimension mismatch");
  }
  PhasePoint<Scalar> out = after;
  long count = 0;
  for (Eigen::Index d = 0; d < before.momentum.size(); ++d) {
    if (before.momentum(d) * after.momentum(d) < 0) {
      out.position(d) = before.position(d);
      out.momentum(d) = -before.momentum(d);
      ++count;
    }
  }
  if (recoiled) *recoiled = count;
  if (count == before.momentum.size()) {
    out.potential = before.potential;
    out.kinetic = before.kinetic;
    out.potential_gradient = before.potential_gradient;
    out.valid = before.valid;
  } else if (count > 0) {
    out.potential = std::numeric_limits<Scalar>::quiet_NaN();
    out.kinetic = std::numeric_limits<Scalar>::quiet_NaN();
  }
  return out;
}

namespace detail {

/// Folds x back into [lo, hi] by mirror reflection; returns the number of
/// reflections (odd means the momentum must flip).
template <typename Scalar>
int fold_into(Scalar& x, Scalar lo, Scalar hi) {
  int flips = 0;
  for (int guard = 0; guard < 64 && (x < lo || x > hi); ++guard) {
    if (x < lo) {
      x = 2 * lo - x;
      ++flips;
    } else if (x > hi) {
      x = 2 * hi - x;
      ++flips;
    }
  }
  return flips;
}

}  // namespace detail

struct LeapfrogOptions {
  bool recoil = false;
  bool boundary_reflection = true;
};

/// One generalized Stormer-Verlet step:
///   p' = p - eps/2 grad U(x);  x' = x + eps grad K(p');  p'' = p' - eps/2 grad U(x').
/// Coordinates leaving a finite support bound are mirrored back (momentum
/// negated) when boundary_reflection is set; otherwise the result is
/// marked invalid. With recoil enabled, coordinates whose momentum changed
/// sign over the step are recoiled (see reflect_recoil).
template <typename Scalar>
PhasePoint<Scalar> leapfrog_step(const PhasePoint<Scalar>& state, const Target<Scalar>& target,
                                 const KineticParams<Scalar>& params, Scalar eps,
                                 const LeapfrogOptions& options = {}, StepStats* stats = nullptr) {
  if (!state.valid) throw std::invalid_argument("leapfrog_step: start point outside support");
  PhasePoint<Scalar> next;
  Vector<Scalar> p_half = state.momentum - (eps / 2) * state.potential_gradient;
  if (stats && has_singular_gradient<Scalar>(p_half, params)) ++stats->singular_gradients;
  next.position = state.position + eps * kinetic_gradient<Scalar>(p_half, params);

  const auto& lo = target.lower_bounds();
  const auto& hi = target.upper_bounds();
  for (Eigen::Index d = 0; d < next.position.size(); ++d) {
    if (next.position(d) >= lo(d) && next.position(d) <= hi(d)) continue;
    if (!options.boundary_reflection) break;
    const int flips = detail::fold_into(next.position(d), lo(d), hi(d));
    if (flips % 2 == 1) p_half(d) = -p_half(d);
    if (stats) ++stats->boundary_reflections;
  }

  next.potential = target.potential(next.position);
  if (!std::isfinite(next.potential)) {
    next.valid = false;
    next.momentum = p_half;
    next.kinetic = kinetic_energy<Scalar>(p_half, params);
    return next;
  }
  next.potential_gradient = target.gradient(next.position);
  next.momentum = p_half - (eps / 2) * next.potential_gradient;
  next.kinetic = kinetic_energy<Scalar>(next.momentum, params);

  if (options.recoil) {
    long recoiled = 0;
    PhasePoint<Scalar> out = reflect_recoil(state, next, &recoiled);
    if (recoiled == 0) return next;
    if (stats) stats->recoils += recoiled;
    if (std::isnan(out.potential)) {
      out.potential = target.potential(out.position);
      out.valid = std::isfinite(out.potential);
      if (out.valid) out.potential_gradient = target.gradient(out.position);
    }
    out.kinetic = kinetic_energy<Scalar>(out.momentum, params);
    return out;
  }
  return next;
}

/// Step size for MCMC iteration `iteration`: uniform jitter for a == 1,
/// otherwise the floor-clamped geometric decay.
template <typename Scalar>
Scalar draw_step_size(const IntegratorConfig<Scalar>& config, const KineticParams<Scalar>& params,
                      long iteration, Rng& rng) {
  if (params.a() == 1) {
    const auto [r1, r2] = config.jitter_range();
    if (r1 == r2) return r1;
    return std::uniform_real_distribution<Scalar>(r1, r2)(rng);
  }
  if (config.decay_init <= config.base_step) return config.base_step;
  const Scalar decayed =
      config.decay_init * std::pow(config.decay_rate, static_cast<Scalar>(iteration));
  return std::max(decayed, config.base_step);
}

template <typename Scalar = double>
struct Trajectory {
  PhasePoint<Scalar> end;
  int steps = 0;
  Scalar step_size = 0;
  StepStats stats;
};

/// L ~ UniformInt[center - halfwidth, center + halfwidth] leapfrog steps
/// with a single step size per trajectory. Stops early once a step leaves
/// the support; the returned endpoint is then invalid.
template <typename Scalar>
Trajectory<Scalar> propose_trajectory(const PhasePoint<Scalar>& start, const Target<Scalar>& target,
                                      const KineticParams<Scalar>& params,
                                      const IntegratorConfig<Scalar>& config, long iteration,
                                      Rng& rng) {
  Trajectory<Scalar> traj;
  traj.steps = std::uniform_int_distribution<int>(config.leapfrog_center - config.leapfrog_halfwidth,
                                                  config.leapfrog_center + config.leapfrog_halfwidth)(rng);
  traj.step_size = draw_step_size(config, params, iteration, rng);
  const LeapfrogOptions options{config.recoil_for(params), config.boundary_reflection};
  traj.end = start;
  for (int s = 0; s < traj.steps; ++s) {
    traj.end = leapfrog_step(traj.end, target, params, traj.step_size, options, &traj.stats);
    if (!traj.end.valid) break;
  }
  return traj;
}

/// Metropolis-Hastings test on the generalized Hamiltonian.
template <typename Scalar>
bool mh_accept(const PhasePoint<Scalar>& start, const PhasePoint<Scalar>& proposal, Rng& rng) {
  if (!proposal.valid) return false;
  const Scalar h0 = start.hamiltonian();
  const Scalar h1 = proposal.hamiltonian();
  if (!std::isfinite(h1)) return false;
  const Scalar log_ratio = h0 - h1;
  if (log_ratio >= 0) return true;
  return std::log(uniform01<Scalar>(rng)) < log_ratio;
}

}  // namespace mgmc
