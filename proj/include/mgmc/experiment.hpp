#pragma once

#include "mgmc/diagnostics.hpp"
#include "mgmc/samplers.hpp"
#include "mgmc/targets.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgmc::cli {

/// Raised for anything wrong with a spec file; maps to exit status 2.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitStatus : int { exit_ok = 0, exit_cell_failures = 1, exit_spec_invalid = 2 };

/// `key = value` lines; '#' starts a comment. Keys keep their first line
/// number for error messages. Duplicate keys are an error.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin);
  static KeyValueFile read(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  int line_of(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
};

struct DatasetSpec {
  /// Empty path means a synthetic data set.
  std::filesystem::path path;
  std::string delimiter = "auto";
  int label_column = -1;
  bool skip_header = false;
  int synthetic_instances = 250;
  int synthetic_dim = 8;
  std::uint64_t synthetic_seed = 7;
  double prior_variance = 100;
};

/// Settings that may be given per monomial parameter as `key@a = value`.
struct PerA {
  double mass = 1;
  double step_size = 0;
  std::optional<std::pair<double, double>> step_jitter;
  int leapfrog_center = 100;
  int leapfrog_halfwidth = 20;
  std::optional<bool> reflection;
};

struct Cell {
  std::size_t index = 0;
  SamplerKind sampler = SamplerKind::mg_hmc;
  /// NaN for std_slice, which has no monomial parameter.
  double a = 0;
  int replication = 0;
  SamplerConfig<double> config;
  std::string label() const;
};

struct ExperimentSpec {
  std::string experiment_id;
  std::string target;
  std::map<std::string, double> target_params;
  DifferenceTerm difference_term = DifferenceTerm::integrable;
  DatasetSpec dataset;
  std::vector<SamplerKind> samplers;
  std::vector<double> a_grid;
  std::map<double, PerA> per_a;
  long iterations = 0;
  long burn_in = 0;
  int replications = 1;
  std::uint64_t seed = 0;
  std::vector<double> initial_position;
  double slice_width = 1;
  int max_doublings = 10;
  double decay_init = 0;
  double decay_rate = 0.9;
  bool confine_to_component = true;
  std::size_t max_lag = 50;
  std::filesystem::path output_dir;
  std::optional<int> workers;

  /// Parses and checks a spec; throws SpecError naming the offending key.
  static ExperimentSpec from_file(const std::filesystem::path& path);
  static ExperimentSpec from_text(const std::string& text, const std::filesystem::path& base_dir,
                                  const std::string& origin = "<spec>");

  Target<double> make_target() const;
  std::vector<Cell> cells() const;
  /// Resolved settings as a spec that reproduces this run.
  std::string to_spec_text() const;
};

/// Writes `content` next to `path` and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string format_number(double v);

struct CellResult {
  Cell cell;
  std::optional<DiagnosticsReport> report;
  std::string error;
};

/// Runs every cell with up to `workers` threads and writes traces,
/// diagnostics.csv, summary.csv, manifest.txt and errors.log under the
/// output directory. Returns an ExitStatus.
int run_experiment(const ExperimentSpec& spec, int workers, std::ostream& log);
int run_experiment(const std::filesystem::path& spec_path, std::optional<int> workers, std::ostream& log);

/// Worker count: explicit value, then MGMC_WORKERS, then the spec, then
/// the hardware concurrency.
int resolve_workers(std::optional<int> explicit_workers, const ExperimentSpec& spec);

std::string diagnostics_header();
std::string summary_header();

struct ReportRow {
  std::string run_dir;
  std::string experiment_id;
  std::string sampler;
  std::string a;
  int replication = 0;
  std::uint64_t seed = 0;
  double min_ess = 0;
  double median_ess = 0;
  double ess_fraction = 0;
  double rho1 = 0;
  double acceptance_rate = 0;
};

/// Merges the diagnostics of completed run directories keyed by
/// (experiment, sampler, a). All runs must share one experiment id.
std::vector<ReportRow> compare_report(const std::vector<std::filesystem::path>& run_dirs);
std::string report_csv(const std::vector<ReportRow>& rows);

struct OracleRow {
  std::string target;
  double a = 0;
  std::string quantity;
  double value = 0;
  double tolerance = 0;
};

/// rho1 and ESS fraction predictions for a 1D target over an a grid:
/// closed forms for the exponential target, nested quadrature otherwise.
std::vector<OracleRow> oracle_table(const std::string& target_name,
                                    const std::map<std::string, double>& params,
                                    const std::vector<double>& a_grid);
std::string oracle_csv(const std::vector<OracleRow>& rows);

/// Built-in target by name: exponential, truncated_gaussian, gamma,
/// bimodal_1d, bimodal_2d. `params` supplies theta and r.
Target<double> builtin_target(const std::string& name, const std::map<std::string, double>& params,
                              DifferenceTerm term = DifferenceTerm::integrable);

std::vector<double> parse_number_list(const std::string& text, const std::string& what);

}  // namespace mgmc::cli
