#include "mgmc/samplers.hpp"
#include "mgmc/oracle.hpp"
#include "test_support.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <cmath>

namespace {

using mgmc::SamplerKind;
using mgmc::testing::chain_config;
using Vec = mgmc::Vector<double>;

Vec scalar(double v) { return Vec::Constant(1, v); }

TEST(SamplerConfig, RejectsBadSettings) {
  const auto t = mgmc::exponential_target(1.0);
  auto c = chain_config(SamplerKind::mg_hmc, 1, 1, 100, 100, 1, scalar(1));
  EXPECT_THROW(mgmc::run_sampler(t, c), std::invalid_argument);
  c.burn_in = 10;
  c.initial_position = Vec::Ones(2);
  EXPECT_THROW(mgmc::run_sampler(t, c), std::invalid_argument);
  c.initial_position = scalar(-1);
  EXPECT_THROW(mgmc::run_sampler(t, c), std::invalid_argument);

  const auto t2 = mgmc::bimodal_2d_target<double>();
  auto c2 = chain_config(SamplerKind::mg_ss_analytic, 1, 1, 100, 10, 1, Vec::Zero(2));
  EXPECT_THROW(mgmc::run_sampler(t2, c2), std::invalid_argument);
}

TEST(SamplerKind, NamesRoundTrip) {
  for (auto k : {SamplerKind::mg_hmc, SamplerKind::mg_ss_analytic, SamplerKind::mg_hmc_analytic,
                 SamplerKind::std_slice}) {
    EXPECT_EQ(mgmc::parse_sampler_kind(mgmc::to_string(k)), k);
  }
  EXPECT_THROW(mgmc::parse_sampler_kind("nuts"), std::invalid_argument);
}

class EverySampler : public ::testing::TestWithParam<SamplerKind> {};

TEST_P(EverySampler, TraceShapesAndDeterminism) {
  const auto t = mgmc::gamma_target(2.0, 1.0);
  const auto c = chain_config(GetParam(), 2, 1, 600, 100, 77, scalar(1));
  const auto a = mgmc::run_sampler(t, c);
  const auto b = mgmc::run_sampler(t, c);
  EXPECT_EQ(a.retained(), 500);
  EXPECT_EQ(a.iterations(), 600);
  EXPECT_EQ(a.hamiltonians.size(), 600u);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.accepted, b.accepted);
  EXPECT_TRUE((a.samples.array() > 0).all());
  if (GetParam() != SamplerKind::mg_hmc) {
    EXPECT_EQ(a.slice_levels.size(), 600u);
    EXPECT_DOUBLE_EQ(a.acceptance_rate(), 1.0);
  }
  auto other = c;
  other.seed = 78;
  EXPECT_NE(mgmc::run_sampler(t, other).samples, a.samples);
}

INSTANTIATE_TEST_SUITE_P(Kinds, EverySampler,
                         ::testing::Values(SamplerKind::mg_hmc, SamplerKind::mg_ss_analytic,
                                           SamplerKind::mg_hmc_analytic, SamplerKind::std_slice),
                         [](const auto& info) { return std::string(mgmc::to_string(info.param)); });

// H_t - U(x_{t-1}) is the Gamma(a, 1) auxiliary draw.
TEST(AnalyticSlice, AuxiliaryVariableIsGammaDistributed) {
  const auto t = mgmc::gamma_target(2.0, 1.0);
  for (double a : {0.5, 1.0, 2.0}) {
    const auto c = chain_config(SamplerKind::mg_ss_analytic, a, 1, 20000, 0, 11, scalar(1));
    const auto trace = mgmc::run_sampler(t, c);
    std::vector<double> g;
    double prev = 1;
    for (long i = 0; i < trace.iterations(); ++i) {
      g.push_back(trace.hamiltonians[static_cast<std::size_t>(i)] - t.potential(prev));
      prev = trace.samples(i, 0);
    }
    const double d = mgmc::testing::ks_statistic(g, [a](double v) { return v <= 0 ? 0.0 : boost::math::gamma_p(a, v); });
    EXPECT_LT(d, mgmc::testing::ks_critical_1pct(g.size())) << "a=" << a;
  }
}

TEST(AnalyticSlice, ExponentialLagOneMatchesClosedForm) {
  const auto t = mgmc::exponential_target(1.0);
  for (double a : {0.5, 1.0, 2.0, 4.0}) {
    const auto c = chain_config(SamplerKind::mg_ss_analytic, a, 1, 60000, 1000, 21, scalar(1));
    const auto trace = mgmc::run_sampler(t, c);
    const Vec x = trace.column(0);
    const double rho1 = mgmc::autocorrelation(x, 1)[0];
    const double se = mgmc::acf_standard_error(x, 1);
    EXPECT_NEAR(rho1, mgmc::oracle::exponential_case_study(a, 1, 1).rho1, 3 * se + 0.01) << "a=" << a;
  }
}

TEST(AnalyticSlice, SymmetricTargetHasNoLagOneCorrelation) {
  const auto t = mgmc::bimodal_1d_target<double>();
  const auto c = chain_config(SamplerKind::mg_ss_analytic, 1, 1, 40000, 1000, 31, scalar(1));
  const Vec x = mgmc::run_sampler(t, c).column(0);
  EXPECT_NEAR(mgmc::autocorrelation(x, 1)[0], 0.0, 3 * mgmc::acf_standard_error(x, 1) + 0.01);
}

TEST(AnalyticHmc, ConfinedDrawStaysInItsWell) {
  const auto t = mgmc::bimodal_1d_target<double>();
  const auto c = chain_config(SamplerKind::mg_hmc_analytic, 0.5, 1, 5000, 0, 41, scalar(1));
  const auto trace = mgmc::run_sampler(t, c);
  double prev = 1;
  long checked = 0;
  for (long i = 0; i < trace.iterations(); ++i) {
    const double x = trace.samples(i, 0);
    if (trace.hamiltonians[static_cast<std::size_t>(i)] < 0) {
      EXPECT_EQ(x > 0, prev > 0) << "iteration " << i;
      ++checked;
    }
    prev = x;
  }
  EXPECT_GT(checked, 1000);
}

TEST(AnalyticHmc, ConfinementReducesModeCrossings) {
  const auto t = mgmc::bimodal_1d_target<double>();
  auto c = chain_config(SamplerKind::mg_hmc_analytic, 1, 1, 20000, 0, 51, scalar(1));
  const auto confined = mgmc::summarize(mgmc::run_sampler(t, c), t);
  c.confine_to_component = false;
  const auto free = mgmc::summarize(mgmc::run_sampler(t, c), t);
  ASSERT_TRUE(confined.mode_cross_count && free.mode_cross_count);
  EXPECT_LT(*confined.mode_cross_count, *free.mode_cross_count);
  EXPECT_GT(*confined.mode_cross_count, 0);
}

TEST(ConditionalDraw, UniformOnSliceWhenAIsOne) {
  const auto t = mgmc::exponential_target(1.0);
  mgmc::Rng rng(61);
  std::vector<double> draws;
  for (int i = 0; i < 20000; ++i) draws.push_back(mgmc::conditional_draw(t, 3.0, mgmc::KineticParams<double>(1, 1), rng));
  const double d = mgmc::testing::ks_statistic(draws, [](double x) { return std::clamp(x / 3, 0.0, 1.0); });
  EXPECT_LT(d, mgmc::testing::ks_critical_1pct(draws.size()));
}

TEST(ConditionalDraw, MatchesQuadratureCdf) {
  const auto t = mgmc::bimodal_1d_target<double>();
  for (double a : {0.5, 2.0}) {
    const mgmc::KineticParams<double> k(a, 1);
    mgmc::Rng rng(62);
    const double level = -0.3;
    std::vector<double> draws;
    for (int i = 0; i < 5000; ++i) draws.push_back(mgmc::conditional_draw(t, level, k, rng));
    std::sort(draws.begin(), draws.end());
    double worst = 0;
    for (std::size_t i = 0; i < draws.size(); i += 100) {
      const double f = mgmc::oracle::brute_force_conditional_cdf(t, level, a, draws[i]);
      worst = std::max({worst, std::abs((static_cast<double>(i) + 1) / 5000 - f), std::abs(static_cast<double>(i) / 5000 - f)});
    }
    EXPECT_LT(worst, mgmc::testing::ks_critical_1pct(draws.size())) << "a=" << a;
  }
}

TEST(ConditionalDraw, EmptySliceIsAnError) {
  const auto t = mgmc::exponential_target(1.0);
  mgmc::Rng rng(63);
  EXPECT_THROW(mgmc::conditional_draw(t, -1.0, mgmc::KineticParams<double>(1, 1), rng), std::runtime_error);
}

TEST(ComponentContaining, PicksThePieceHoldingX) {
  const mgmc::SliceSet<double> slice{{-2, -1}, {1, 2}};
  EXPECT_EQ(mgmc::component_containing(slice, 1.5).front().lower, 1);
  EXPECT_EQ(mgmc::component_containing(slice, -1.5).front().upper, -1);
  EXPECT_EQ(mgmc::component_containing(slice, 2.0000001).front().lower, 1);
}

TEST(MgHmc, HugeStepsAreFlaggedDivergent) {
  const auto t = mgmc::truncated_gaussian_target(1.0);
  auto c = chain_config(SamplerKind::mg_hmc, 0.5, 1, 200, 0, 71, scalar(1));
  c.integrator.base_step = 50;
  c.integrator.leapfrog_center = 10;
  c.integrator.leapfrog_halfwidth = 0;
  const auto trace = mgmc::run_sampler(t, c);
  EXPECT_GT(trace.divergences, 100);
  EXPECT_LT(trace.acceptance_rate(), 0.2);
  EXPECT_EQ(mgmc::summarize(trace, t).divergence_count, trace.divergences);
}

TEST(MgHmc, RecoilIsCountedForLargeA) {
  const auto t = mgmc::exponential_target(1.0);
  auto c = chain_config(SamplerKind::mg_hmc, 2, 0.5, 500, 0, 72, scalar(1));
  EXPECT_GT(mgmc::run_sampler(t, c).recoils, 0);
  c.integrator.reflection_enabled = false;
  EXPECT_EQ(mgmc::run_sampler(t, c).recoils, 0);
}

struct KsCase {
  SamplerKind kind;
  double a;
  double m;
  double eps;
};

class ExponentialKs : public ::testing::TestWithParam<KsCase> {};

TEST_P(ExponentialKs, ThinnedDrawsMatchTarget) {
  const auto p = GetParam();
  const auto t = mgmc::exponential_target(1.0);
  auto c = chain_config(p.kind, p.a, p.m, 30000, 5000, 81, scalar(1));
  c.integrator.base_step = p.eps;
  c.integrator.leapfrog_center = 50;
  c.integrator.leapfrog_halfwidth = 10;
  const auto draws = mgmc::testing::thin_by_autocorrelation(mgmc::run_sampler(t, c).column(0));
  const double d = mgmc::testing::ks_statistic(draws, [](double x) { return x <= 0 ? 0.0 : 1 - std::exp(-x); });
  EXPECT_LT(d, mgmc::testing::ks_critical_1pct(draws.size())) << "n=" << draws.size();
}

INSTANTIATE_TEST_SUITE_P(Samplers, ExponentialKs,
                         ::testing::Values(KsCase{SamplerKind::mg_hmc, 0.5, 1, 0.05},
                                           KsCase{SamplerKind::mg_hmc, 1, 1, 0.1},
                                           KsCase{SamplerKind::mg_hmc, 2, 0.5, 0.1},
                                           KsCase{SamplerKind::mg_ss_analytic, 0.5, 1, 0.1},
                                           KsCase{SamplerKind::mg_hmc_analytic, 2, 1, 0.1},
                                           KsCase{SamplerKind::std_slice, 1, 1, 0.1}));

TEST(StdSlice, TwoDimensionalTargetVisitsBothModes) {
  const auto t = mgmc::bimodal_2d_target<double>();
  Vec x0(2);
  x0 << 2, 2;
  const auto c = chain_config(SamplerKind::std_slice, 1, 1, 20000, 1000, 91, x0);
  const auto trace = mgmc::run_sampler(t, c);
  const auto report = mgmc::summarize(trace, t);
  ASSERT_TRUE(report.mode_cross_count.has_value());
  EXPECT_GT(*report.mode_cross_count, 10);
  const Vec s = trace.samples.rowwise().sum();
  EXPECT_NEAR(s.mean(), 0.0, 1.0);
  // random-side doubling can exhaust the cap with probability about 2^-10 per update
  EXPECT_LT(trace.doubling_cap_hits, 2 * 20000 / 100);
}

}  // namespace
