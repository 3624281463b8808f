#include "mgmc/diagnostics.hpp"

#include <cstdio>
#include <sstream>

namespace mgmc {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string join(const std::vector<double>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += fmt(values[i]);
  }
  return out;
}

double rho1(const DiagnosticsReport& r) {
  return !r.acf.empty() && !r.acf.front().empty() ? r.acf.front().front() : 0.0;
}

}  // namespace

std::string to_key_value(const DiagnosticsReport& r) {
  std::ostringstream out;
  out << "samples = " << r.samples << '\n';
  out << "ess_method = " << r.ess_method << '\n';
  out << "min_ess = " << fmt(r.min_ess) << '\n';
  out << "median_ess = " << fmt(r.median_ess) << '\n';
  out << "acceptance_rate = " << fmt(r.acceptance_rate) << '\n';
  out << "divergence_count = " << r.divergence_count << '\n';
  if (r.mode_cross_count) out << "mode_cross_count = " << *r.mode_cross_count << '\n';
  for (std::size_t d = 0; d < r.ess.size(); ++d) {
    out << "ess." << d << " = " << fmt(r.ess[d]) << '\n';
    out << "acf." << d << " = " << join(r.acf[d], ' ') << '\n';
  }
  return out.str();
}

std::string csv_header() {
  return "samples,min_ess,median_ess,ess_fraction,rho1,acceptance_rate,divergence_count,mode_cross_count,ess_per_dim";
}

std::string to_csv_row(const DiagnosticsReport& r) {
  std::ostringstream out;
  const double fraction = r.samples > 0 ? r.min_ess / static_cast<double>(r.samples) : 0.0;
  out << r.samples << ',' << fmt(r.min_ess) << ',' << fmt(r.median_ess) << ',' << fmt(fraction) << ','
      << fmt(rho1(r)) << ',' << fmt(r.acceptance_rate) << ',' << r.divergence_count << ','
      << (r.mode_cross_count ? std::to_string(*r.mode_cross_count) : std::string()) << ','
      << join(r.ess, ';');
  return out.str();
}

}  // namespace mgmc
