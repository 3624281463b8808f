// Benchmark runner: mgmc run | report | oracle | validate
#include "mgmc/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace cli = mgmc::cli;

int main(int argc, char** argv) {
  CLI::App app{"Monomial Gamma MCMC benchmark runner"};
  app.require_subcommand(1);

  std::string spec_path;
  std::optional<int> workers;
  auto* run = app.add_subcommand("run", "execute every cell of an experiment spec");
  run->add_option("spec", spec_path, "spec file (key = value)")->required();
  run->add_option("-j,--workers", workers, "concurrent cells (overrides MGMC_WORKERS)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a spec without running it");
  validate->add_option("spec", validate_path, "spec file")->required();

  std::vector<std::string> dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "merge diagnostics from completed run directories");
  report->add_option("dirs", dirs, "run directories")->required();
  report->add_option("-o,--output", report_out, "write the merged CSV here instead of stdout");

  std::string oracle_target;
  std::string a_grid;
  double theta = 1;
  double r = 2;
  std::string cache;
  auto* oracle = app.add_subcommand("oracle", "closed-form and quadrature predictions for rho(1)");
  oracle->add_option("target", oracle_target, "exponential | truncated_gaussian | gamma | bimodal_1d")->required();
  oracle->add_option("a_grid", a_grid, "comma-separated monomial parameters, e.g. 0.5,1,2,4")->required();
  oracle->add_option("--theta", theta, "target scale parameter");
  oracle->add_option("--r", r, "Gamma shape parameter");
  oracle->add_option("--cache", cache, "also write the table to this CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage errors share the invalid-spec status; --help exits 0
    const int code = app.exit(e);
    return code == 0 ? cli::exit_ok : cli::exit_spec_invalid;
  }

  try {
    if (*run) return cli::run_experiment(spec_path, workers, std::cout);
    if (*validate) {
      const auto spec = cli::ExperimentSpec::from_file(validate_path);
      std::cout << "ok: " << spec.experiment_id << ", " << spec.cells().size() << " cells\n";
      return cli::exit_ok;
    }
    if (*report) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      const std::string table = cli::report_csv(cli::compare_report(paths));
      if (report_out.empty()) {
        std::cout << table;
      } else {
        cli::write_atomic(report_out, table);
      }
      return cli::exit_ok;
    }
    if (*oracle) {
      std::map<std::string, double> params{{"theta", theta}};
      if (oracle_target == "gamma") params["r"] = r;
      const auto table = cli::oracle_csv(cli::oracle_table(oracle_target, params, cli::parse_number_list(a_grid, "a_grid")));
      std::cout << table;
      if (!cache.empty()) cli::write_atomic(cache, table);
      return cli::exit_ok;
    }
  } catch (const cli::SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return cli::exit_spec_invalid;
  } catch (const cli::ReportError& e) {
    std::cerr << "report error: " << e.what() << '\n';
    return cli::exit_cell_failures;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_cell_failures;
  }
  return cli::exit_ok;
}
