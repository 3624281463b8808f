#include "mgmc/integrator.hpp"
#include "mgmc/samplers.hpp"
#include "test_support.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <cmath>

namespace {

using mgmc::KineticParams;
using mgmc::PhasePoint;
using mgmc::Target;
using Vec = mgmc::Vector<double>;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Target<double> quadratic(int dim) {
  return Target<double>(
      "quadratic", dim, [](const mgmc::VectorRef<double>& x) { return 0.5 * x.squaredNorm(); },
      [](const mgmc::VectorRef<double>& x) { return Vec(x); });
}

Target<double> flat(int dim) {
  return Target<double>(
      "flat", dim, [](const mgmc::VectorRef<double>&) { return 0.0; },
      [dim](const mgmc::VectorRef<double>&) { return Vec::Zero(dim); });
}

PhasePoint<double> point(const Target<double>& t, const KineticParams<double>& k, Vec x, Vec p) {
  return mgmc::make_phase_point<double>(std::move(x), std::move(p), t, k);
}

TEST(LeapfrogStep, HandArithmeticOnExponentialTarget) {
  const auto t = mgmc::exponential_target(1.0);
  const KineticParams<double> k(0.5, 1);
  const auto next = mgmc::leapfrog_step(point(t, k, vec({1}), vec({0.5})), t, k, 0.1);
  // p_half = 0.5 - 0.05 = 0.45; x' = 1 + 0.1 * 2 * 0.45; p' = 0.45 - 0.05
  EXPECT_NEAR(next.position(0), 1.09, 1e-15);
  EXPECT_NEAR(next.momentum(0), 0.40, 1e-15);
  EXPECT_TRUE(next.valid);
  EXPECT_NEAR(next.kinetic, 0.16, 1e-15);
}

TEST(LeapfrogStep, LeavingSupportWithoutReflectionIsInvalid) {
  const auto t = mgmc::exponential_target(1.0);
  const KineticParams<double> k(0.5, 1);
  mgmc::LeapfrogOptions opts;
  opts.boundary_reflection = false;
  const auto next = mgmc::leapfrog_step(point(t, k, vec({0.05}), vec({-1})), t, k, 0.1, opts);
  EXPECT_FALSE(next.valid);
  EXPECT_TRUE(std::isinf(next.hamiltonian()));
}

TEST(LeapfrogStep, BoundaryReflectionMirrorsPosition) {
  const auto t = mgmc::exponential_target(1.0);
  const KineticParams<double> k(1, 1);
  mgmc::StepStats stats;
  const auto next = mgmc::leapfrog_step(point(t, k, vec({0.05}), vec({-1})), t, k, 0.1, {}, &stats);
  EXPECT_TRUE(next.valid);
  EXPECT_NEAR(next.position(0), 0.05, 1e-15);
  EXPECT_GT(next.momentum(0), 0);
  EXPECT_EQ(stats.boundary_reflections, 1);
}

TEST(ReflectRecoil, Examples) {
  PhasePoint<double> before;
  before.position = vec({2});
  before.momentum = vec({1});
  PhasePoint<double> after;
  after.position = vec({2.3});
  after.momentum = vec({-0.2});
  auto out = mgmc::reflect_recoil(before, after);
  EXPECT_EQ(out.position(0), 2);
  EXPECT_EQ(out.momentum(0), -1);

  after.momentum = vec({0.5});
  out = mgmc::reflect_recoil(before, after);
  EXPECT_EQ(out.position(0), 2.3);
  EXPECT_EQ(out.momentum(0), 0.5);

  before.position = vec({1, 2});
  before.momentum = vec({1, 1});
  after.position = vec({1.5, 2.5});
  after.momentum = vec({0.7, -0.3});
  long recoiled = 0;
  out = mgmc::reflect_recoil(before, after, &recoiled);
  EXPECT_EQ(recoiled, 1);
  EXPECT_EQ(out.position, vec({1.5, 2}));
  EXPECT_EQ(out.momentum, vec({0.7, -1}));
}

TEST(ReflectRecoil, PreservesMomentumMagnitude) {
  mgmc::Rng rng(4);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 100; ++i) {
    PhasePoint<double> before;
    PhasePoint<double> after;
    before.position = Vec::Zero(4);
    after.position = Vec::Ones(4);
    before.momentum = Vec(4);
    after.momentum = Vec(4);
    for (int d = 0; d < 4; ++d) {
      before.momentum(d) = normal(rng);
      after.momentum(d) = normal(rng);
    }
    const auto out = mgmc::reflect_recoil(before, after);
    const KineticParams<double> k(2, 1);
    for (int d = 0; d < 4; ++d) {
      const double expected = before.momentum(d) * after.momentum(d) < 0 ? std::abs(before.momentum(d))
                                                                          : std::abs(after.momentum(d));
      EXPECT_EQ(std::abs(out.momentum(d)), expected);
    }
    if ((before.momentum.array() * after.momentum.array() < 0).all()) {
      EXPECT_EQ(mgmc::kinetic_energy<double>(out.momentum, k), mgmc::kinetic_energy<double>(before.momentum, k));
    }
  }
}

TEST(LeapfrogStep, RecoilKeepsStepInPlace) {
  // a = 2 at small |p| against a strong pull: the momentum flips inside one step
  const auto t = mgmc::truncated_gaussian_target(10.0);
  const KineticParams<double> k(2, 1);
  mgmc::LeapfrogOptions opts;
  opts.recoil = true;
  mgmc::StepStats stats;
  const auto start = point(t, k, vec({2}), vec({0.5}));
  const auto next = mgmc::leapfrog_step(start, t, k, 0.1, opts, &stats);
  EXPECT_EQ(stats.recoils, 1);
  EXPECT_EQ(next.position(0), 2);
  EXPECT_EQ(next.momentum(0), -0.5);
  EXPECT_DOUBLE_EQ(next.hamiltonian(), start.hamiltonian());
}

TEST(DrawStepSize, Examples) {
  mgmc::Rng rng(1);
  mgmc::IntegratorConfig<double> c;
  c.base_step = 0.15;
  c.step_jitter_range = std::make_pair(0.1, 0.2);
  for (int i = 0; i < 1000; ++i) {
    const double eps = mgmc::draw_step_size(c, KineticParams<double>(1, 1), i, rng);
    EXPECT_GE(eps, 0.1);
    EXPECT_LE(eps, 0.2);
  }
  c.base_step = 0.1;
  c.decay_init = 1e6;
  c.decay_rate = 0.9;
  EXPECT_DOUBLE_EQ(mgmc::draw_step_size(c, KineticParams<double>(0.5, 1), 200, rng), 0.1);
  EXPECT_DOUBLE_EQ(mgmc::draw_step_size(c, KineticParams<double>(2, 1), 0, rng), 1e6);
  // 1e6 * 0.9^100 = 26.56 is still above the floor
  EXPECT_NEAR(mgmc::draw_step_size(c, KineticParams<double>(2, 1), 100, rng), 1e6 * std::pow(0.9, 100), 1e-9);
  c.decay_init = 0;
  EXPECT_DOUBLE_EQ(mgmc::draw_step_size(c, KineticParams<double>(2, 1), 0, rng), 0.1);
}

TEST(IntegratorConfig, ValidatesInvariants) {
  mgmc::IntegratorConfig<double> c;
  EXPECT_NO_THROW(c.validate());
  c.leapfrog_halfwidth = 100;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.leapfrog_halfwidth = 20;
  c.step_jitter_range = std::make_pair(0.3, 0.2);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.step_jitter_range.reset();
  c.base_step = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(IntegratorConfig, RecoilDefaultsByMonomialParameter) {
  mgmc::IntegratorConfig<double> c;
  EXPECT_FALSE(c.recoil_for(KineticParams<double>(0.5, 1)));
  EXPECT_FALSE(c.recoil_for(KineticParams<double>(1, 1)));
  EXPECT_TRUE(c.recoil_for(KineticParams<double>(2, 1)));
  c.reflection_enabled = false;
  EXPECT_FALSE(c.recoil_for(KineticParams<double>(4, 1)));
}

TEST(ProposeTrajectory, FixedStepCountWithoutJitter) {
  const auto t = quadratic(1);
  const KineticParams<double> k(0.5, 1);
  mgmc::IntegratorConfig<double> c;
  c.leapfrog_halfwidth = 0;
  mgmc::Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(mgmc::propose_trajectory(point(t, k, vec({1}), vec({0.3})), t, k, c, i, rng).steps, 100);
  }
}

TEST(ProposeTrajectory, StepCountMean) {
  const auto t = flat(1);
  const KineticParams<double> k(0.5, 1);
  mgmc::IntegratorConfig<double> c;
  mgmc::Rng rng(5);
  double total = 0;
  for (int i = 0; i < 10000; ++i) {
    total += mgmc::propose_trajectory(point(t, k, vec({0}), vec({0.1})), t, k, c, i, rng).steps;
  }
  EXPECT_NEAR(total / 10000, 100, 0.5);
}

TEST(ProposeTrajectory, FreeParticleMovesLinearly) {
  const auto t = flat(2);
  for (double a : {0.5, 1.0, 2.0}) {
    const KineticParams<double> k(a, 1.3);
    mgmc::IntegratorConfig<double> c;
    c.base_step = 0.05;
    c.reflection_enabled = false;
    mgmc::Rng rng(6);
    const Vec p0 = vec({0.7, -1.1});
    const auto traj = mgmc::propose_trajectory(point(t, k, vec({0, 0}), p0), t, k, c, 0, rng);
    const Vec expected = traj.steps * traj.step_size * mgmc::kinetic_gradient<double>(p0, k);
    EXPECT_NEAR((traj.end.position - expected).norm(), 0.0, 1e-12) << "a=" << a;
    EXPECT_EQ(traj.end.momentum, p0);
  }
}

TEST(MhAccept, Examples) {
  mgmc::Rng rng(7);
  PhasePoint<double> start;
  start.potential = 1;
  start.kinetic = 0.5;
  PhasePoint<double> same = start;
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(mgmc::mh_accept(start, same, rng));

  PhasePoint<double> invalid = start;
  invalid.valid = false;
  EXPECT_FALSE(mgmc::mh_accept(start, invalid, rng));

  PhasePoint<double> worse = start;
  worse.potential += std::log(2.0);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += mgmc::mh_accept(start, worse, rng);
  EXPECT_NEAR(hits / 10000.0, 0.5, 0.01);
}

TEST(Leapfrog, VolumePreservingOnQuadratic) {
  const auto t = quadratic(1);
  const KineticParams<double> k(0.5, 1);
  const double h = 1e-6;
  auto step = [&](double x, double p) {
    const auto s = mgmc::leapfrog_step(point(t, k, vec({x}), vec({p})), t, k, 0.1);
    return std::make_pair(s.position(0), s.momentum(0));
  };
  for (auto [x, p] : {std::pair{0.3, 0.8}, std::pair{-1.2, 0.1}, std::pair{2.0, -1.5}}) {
    const auto xp = step(x + h, p);
    const auto xm = step(x - h, p);
    const auto pp = step(x, p + h);
    const auto pm = step(x, p - h);
    const double dxdx = (xp.first - xm.first) / (2 * h);
    const double dpdx = (xp.second - xm.second) / (2 * h);
    const double dxdp = (pp.first - pm.first) / (2 * h);
    const double dpdp = (pp.second - pm.second) / (2 * h);
    EXPECT_NEAR(dxdx * dpdp - dxdp * dpdx, 1.0, 1e-8);
  }
}

TEST(Leapfrog, ReversibleToRoundoff) {
  const auto t = mgmc::bimodal_2d_target<double>();
  for (double a : {0.5, 1.0, 2.0}) {
    const KineticParams<double> k(a, 1);
    auto s = point(t, k, vec({0.4, -0.9}), vec({0.6, 0.3}));
    const Vec x0 = s.position;
    const Vec p0 = s.momentum;
    for (int i = 0; i < 100; ++i) s = mgmc::leapfrog_step(s, t, k, 0.01);
    s = point(t, k, s.position, -s.momentum);
    for (int i = 0; i < 100; ++i) s = mgmc::leapfrog_step(s, t, k, 0.01);
    EXPECT_NEAR((s.position - x0).norm(), 0.0, 1e-12) << "a=" << a;
    EXPECT_NEAR((s.momentum + p0).norm(), 0.0, 1e-12) << "a=" << a;
  }
}

double max_energy_error(double eps) {
  const auto t = mgmc::truncated_gaussian_target(1.0);
  const KineticParams<double> k(0.5, 1);
  auto s = point(t, k, vec({3}), vec({0}));
  const double h0 = s.hamiltonian();
  double worst = 0;
  // fixed integration time 0.5, so only eps changes
  for (int i = 0; i < static_cast<int>(std::lround(0.5 / eps)); ++i) {
    s = mgmc::leapfrog_step(s, t, k, eps);
    worst = std::max(worst, std::abs(s.hamiltonian() - h0));
  }
  return worst;
}

TEST(Leapfrog, EnergyErrorIsSecondOrder) {
  const double ratio = max_energy_error(0.005) / max_energy_error(0.0025);
  EXPECT_NEAR(ratio, 4.0, 0.8);
}

// Exponential target, no recoil: binned chi-square against the exact CDF
// on draws thinned to roughly independent ones.
TEST(MgHmc, ChiSquareGoodnessOfFitWithoutReflection) {
  const auto t = mgmc::exponential_target(1.0);
  auto c = mgmc::testing::chain_config(mgmc::SamplerKind::mg_hmc, 1, 1, 40000, 10000, 2024, vec({1}));
  c.integrator.base_step = 0.1;
  c.integrator.reflection_enabled = false;
  const auto trace = mgmc::run_mg_hmc(t, c);
  const auto draws = mgmc::testing::thin_by_autocorrelation(trace.column(0));
  constexpr int bins = 20;
  std::vector<double> counts(bins, 0.0);
  for (double x : draws) {
    const int b = std::min(bins - 1, static_cast<int>((1 - std::exp(-x)) * bins));
    counts[static_cast<std::size_t>(b)] += 1;
  }
  const double expected = static_cast<double>(draws.size()) / bins;
  double chi2 = 0;
  for (double n : counts) chi2 += (n - expected) * (n - expected) / expected;
  const double critical = boost::math::quantile(boost::math::complement(boost::math::chi_squared(bins - 1), 0.01));
  EXPECT_LT(chi2, critical) << "draws=" << draws.size();
}

}  // namespace
