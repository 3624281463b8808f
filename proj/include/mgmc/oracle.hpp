#pragma once

#include "mgmc/targets.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mgmc::oracle {

/// Closed forms for the exact MG slice sampler on U(x) = x / theta.
struct CaseStudyPrediction {
  double a = 0;
  double theta = 0;
  double n = 0;
  double rho1 = 0;
  double ess_fraction = 0;

  double rho_h(int h) const { return std::pow(a + 1, -h); }
  double ess() const { return n * ess_fraction; }
  /// E[x_h | x_0] for the h-step kernel.
  double lag_mean(double x0, int h) const { return theta + (x0 - theta) / std::pow(a + 1, h); }
};

CaseStudyPrediction exponential_case_study(double a, double theta, double n);

struct QuadratureSpec {
  /// Relative tolerance requested from every integral.
  double rel_tol = 1e-6;
  int max_refinements = 15;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean and variance of the target density exp(-U)/Z by quadrature.
struct Moments {
  double normalizer = 0;
  double mean = 0;
  double variance = 0;
};
Moments target_moments(const Target<double>& target, const QuadratureSpec& spec = {});

/// Lag-one autocorrelation of the exact MG slice sampler by nested
/// quadrature over x ~ pi, g ~ Gamma(a, 1) and the conditional of x'
/// given H = U(x) + g.
double numeric_rho1(const Target<double>& target, double a, const QuadratureSpec& spec = {});

/// E[x' | H] under the conditional proportional to (H - U)^(a-1) on the slice.
double conditional_mean(const Target<double>& target, double level, double a,
                        const QuadratureSpec& spec = {});

/// CDF at x of the conditional proportional to (H - U)^(a-1) on the full
/// slice {U <= H}, by quadrature.
double brute_force_conditional_cdf(const Target<double>& target, double level, double a, double x,
                                   const QuadratureSpec& spec = {});

/// CDF of the target density exp(-U)/Z at x (1D), by quadrature.
double target_cdf(const Target<double>& target, double x, const QuadratureSpec& spec = {});

struct SymmetryPrediction {
  double center = 0;
  double rho1 = 0;
  std::string statement;
};

/// For a target mirror-symmetric about C, the exact MG slice sampler has
/// lag-one autocorrelation 0 (ESS equal to N). Throws for targets that do
/// not declare a symmetry center.
SymmetryPrediction symmetric_target_ess_prediction(const Target<double>& target);

}  // namespace mgmc::oracle
