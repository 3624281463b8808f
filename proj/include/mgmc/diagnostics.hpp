#pragma once

#include "mgmc/samplers.hpp"
#include "mgmc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgmc {

class DegenerateChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename Scalar>
struct Centered {
  std::vector<Scalar> values;
  Scalar variance = 0;  // divide-by-N
};

template <typename Scalar>
Centered<Scalar> center(std::span<const Scalar> samples) {
  if (samples.size() < 10) throw std::invalid_argument("autocorrelation needs at least 10 samples");
  Centered<Scalar> c;
  const Scalar n = static_cast<Scalar>(samples.size());
  Scalar mean = 0;
  for (Scalar v : samples) mean += v;
  mean /= n;
  c.values.reserve(samples.size());
  for (Scalar v : samples) c.values.push_back(v - mean);
  Scalar ss = 0;
  for (Scalar v : c.values) ss += v * v;
  c.variance = ss / n;
  if (!(c.variance > 0)) throw DegenerateChainError("chain has zero variance");
  return c;
}

template <typename Scalar>
Scalar lag_autocorrelation(const Centered<Scalar>& c, std::size_t lag) {
  const std::size_t n = c.values.size();
  if (lag >= n) return 0;
  Scalar acc = 0;
  for (std::size_t t = 0; t + lag < n; ++t) acc += c.values[t] * c.values[t + lag];
  return acc / static_cast<Scalar>(n) / c.variance;
}

}  // namespace detail

/// Biased (divide-by-N) sample autocorrelation at lags 1..max_lag.
template <typename Scalar>
std::vector<Scalar> autocorrelation(std::span<const Scalar> samples, std::size_t max_lag) {
  const auto c = detail::center(samples);
  std::vector<Scalar> acf;
  acf.reserve(max_lag);
  for (std::size_t h = 1; h <= max_lag; ++h) acf.push_back(detail::lag_autocorrelation(c, h));
  return acf;
}

template <typename Scalar>
std::vector<Scalar> autocorrelation(const Vector<Scalar>& samples, std::size_t max_lag) {
  return autocorrelation(std::span<const Scalar>(samples.data(), static_cast<std::size_t>(samples.size())), max_lag);
}

struct EssEstimate {
  double ess = 0;
  /// Integrated autocorrelation time N / ESS before clipping.
  double tau = 0;
  /// Last lag included in the truncated sum.
  std::size_t truncation_lag = 0;
};

/// ESS = N / (1 + 2 sum_h rho(h)), with the sum truncated by Geyer's
/// initial positive sequence: pairs rho(2k) + rho(2k+1) are added while
/// positive. Clipped to (0, 1.05 N].
template <typename Scalar>
EssEstimate effective_sample_size_detail(std::span<const Scalar> samples) {
  const auto c = detail::center(samples);
  const std::size_t n = samples.size();
  // tau = -1 + 2 * sum_{k >= 0} (rho(2k) + rho(2k+1)), rho(0) = 1
  double pair_sum = 0;
  std::size_t last = 0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double even = k == 0 ? 1.0 : static_cast<double>(detail::lag_autocorrelation(c, 2 * k));
    const double odd = static_cast<double>(detail::lag_autocorrelation(c, 2 * k + 1));
    const double gamma = even + odd;
    if (!(gamma > 0)) break;
    pair_sum += gamma;
    last = 2 * k + 1;
  }
  EssEstimate out;
  out.tau = std::max(-1.0 + 2.0 * pair_sum, 1e-12);
  out.truncation_lag = last;
  out.ess = std::min(static_cast<double>(n) / out.tau, 1.05 * static_cast<double>(n));
  return out;
}

template <typename Scalar>
double effective_sample_size(std::span<const Scalar> samples) {
  return effective_sample_size_detail(samples).ess;
}

template <typename Scalar>
double effective_sample_size(const Vector<Scalar>& samples) {
  return effective_sample_size(std::span<const Scalar>(samples.data(), static_cast<std::size_t>(samples.size())));
}

/// Monte Carlo standard error of the lag-h autocorrelation estimate by
/// batch means: the ratio estimate is formed inside each of `batches`
/// contiguous blocks (around the global mean) and the spread of the block
/// values gives the error of their average.
template <typename Scalar>
double acf_standard_error(std::span<const Scalar> samples, std::size_t lag = 1, std::size_t batches = 30) {
  const auto c = detail::center(samples);
  const std::size_t n = samples.size();
  if (lag >= n) throw std::invalid_argument("acf_standard_error: lag exceeds sample count");
  const std::size_t per_batch = n / batches;
  if (per_batch <= lag + 1) throw std::invalid_argument("acf_standard_error: too few samples for batching");
  std::vector<double> block(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    double cross = 0;
    double square = 0;
    const std::size_t begin = b * per_batch;
    const std::size_t end = begin + per_batch;
    for (std::size_t t = begin; t < end; ++t) {
      square += static_cast<double>(c.values[t] * c.values[t]);
      if (t + lag < end) cross += static_cast<double>(c.values[t] * c.values[t + lag]);
    }
    block[b] = square > 0 ? cross / square : 0.0;
  }
  double mean = 0;
  for (double v : block) mean += v;
  mean /= static_cast<double>(batches);
  double var = 0;
  for (double v : block) var += (v - mean) * (v - mean);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

template <typename Scalar>
double acf_standard_error(const Vector<Scalar>& samples, std::size_t lag = 1, std::size_t batches = 30) {
  return acf_standard_error(std::span<const Scalar>(samples.data(), static_cast<std::size_t>(samples.size())), lag, batches);
}

/// Number of sign changes along the sequence, ignoring exact zeros.
template <typename Scalar>
long count_sign_changes(std::span<const Scalar> values) {
  long changes = 0;
  int last = 0;
  for (Scalar v : values) {
    const int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

struct DiagnosticsReport {
  std::vector<std::vector<double>> acf;  // per dimension, lags 1..max_lag
  std::vector<double> ess;
  double min_ess = 0;
  double median_ess = 0;
  double acceptance_rate = 0;
  long divergence_count = 0;
  std::optional<long> mode_cross_count;
  long samples = 0;
  std::string ess_method = "geyer_initial_positive";
};

/// Per-dimension ACF and ESS, their min and median, acceptance over the
/// retained iterations, divergences, and the mode-crossing count for
/// targets that declare a mode axis.
template <typename Scalar>
DiagnosticsReport summarize(const Trace<Scalar>& trace, const Target<Scalar>& target,
                            std::size_t max_lag = 50) {
  if (trace.retained() == 0) throw std::invalid_argument("summarize: empty trace");
  DiagnosticsReport report;
  report.samples = trace.retained();
  report.acceptance_rate = trace.acceptance_rate();
  report.divergence_count = trace.divergences;
  const std::size_t lags = std::min<std::size_t>(max_lag, static_cast<std::size_t>(trace.retained()) - 1);
  for (Eigen::Index d = 0; d < trace.samples.cols(); ++d) {
    const Vector<Scalar> col = trace.samples.col(d);
    const std::span<const Scalar> view(col.data(), static_cast<std::size_t>(col.size()));
    std::vector<double> acf_d;
    double ess_d = 0;
    try {
      for (Scalar v : autocorrelation(view, lags)) acf_d.push_back(static_cast<double>(v));
      ess_d = effective_sample_size(view);
    } catch (const DegenerateChainError&) {
      // a chain that never moved carries no information
      acf_d.assign(lags, 1.0);
      ess_d = 0;
    } catch (const std::invalid_argument&) {
      // too short for an autocorrelation estimate
      acf_d.clear();
      ess_d = 0;
    }
    report.acf.push_back(std::move(acf_d));
    report.ess.push_back(ess_d);
  }
  std::vector<double> sorted = report.ess;
  std::sort(sorted.begin(), sorted.end());
  report.min_ess = sorted.front();
  const std::size_t mid = sorted.size() / 2;
  report.median_ess = sorted.size() % 2 == 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
  if (const auto& axis = target.mode_axis()) {
    const Vector<Scalar> projected = trace.samples * (*axis);
    report.mode_cross_count =
        count_sign_changes(std::span<const Scalar>(projected.data(), static_cast<std::size_t>(projected.size())));
  }
  return report;
}

/// Flat `key = value` lines.
std::string to_key_value(const DiagnosticsReport& report);

/// Column header matching `to_csv_row`.
std::string csv_header();
std::string to_csv_row(const DiagnosticsReport& report);

}  // namespace mgmc
