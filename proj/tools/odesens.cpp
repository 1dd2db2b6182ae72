// odesens: perturbation studies for ODEs with an inexact component function.
//
//   odesens run   --problem zermelo --epsilon 0.1 --out out/
//   odesens sweep --problem hypersonic --eps-list 1e-4,1e-3,1e-2 --out sweep/
//   odesens check --problem zermelo
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 partial sweep.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "odesens/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;

struct Flags {
  std::string config_file;
  std::optional<std::string> problem;
  std::optional<std::string> custom_file;
  std::optional<double> epsilon;
  std::optional<std::size_t> grid_n;
  std::optional<double> rtol;
  std::optional<double> atol;
  std::optional<double> lipschitz;
  std::optional<double> cap;
  std::optional<std::size_t> restarts;
  std::optional<std::size_t> max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  std::vector<double> eps_list;
  bool no_refinement = false;
  std::size_t probes = 50;
  double check_tol = 1e-4;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "JSON config file; flags override its values");
  app->add_option("--problem", f.problem, "zermelo, hypersonic or custom");
  app->add_option("--custom-file", f.custom_file, "JSON problem file for --problem custom");
  app->add_option("--grid-n", f.grid_n, "number of grid nodes");
  app->add_option("--rtol", f.rtol, "relative tolerance; selects the adaptive integrator");
  app->add_option("--atol", f.atol, "absolute tolerance; selects the adaptive integrator");
  app->add_option("--lipschitz", f.lipschitz, "Lipschitz constant for the Gronwall bound");
  app->add_option("--cap", f.cap, "clamp for the Gronwall bound");
  app->add_option("--restarts", f.restarts, "random starts for the worst-case search");
  app->add_option("--max-iters", f.max_iters, "iteration limit per start");
  app->add_option("--seed", f.seed, "random seed");
  app->add_flag("--no-refinement", f.no_refinement, "skip the grid-refinement check");
}

odesens::ProblemConfig make_config(const Flags& f) {
  odesens::ProblemConfig c;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) {
      throw odesens::ConfigError("cannot open config file " + f.config_file);
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw odesens::ConfigError("config file: " + std::string(e.what()));
    }
    c = odesens::config_from_json(j);
  }
  if (f.problem) c.problem = odesens::parse_problem_kind(*f.problem);
  if (f.custom_file) c.custom_file = *f.custom_file;
  if (f.epsilon) c.epsilon = *f.epsilon;
  if (f.grid_n) c.grid_n = f.grid_n;
  if (f.rtol) c.rtol = f.rtol;
  if (f.atol) c.atol = f.atol;
  if (f.lipschitz) c.lipschitz = f.lipschitz;
  if (f.cap) c.cap = *f.cap;
  if (f.restarts) c.restarts = *f.restarts;
  if (f.max_iters) c.max_iters = *f.max_iters;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.out) c.out_dir = *f.out;
  if (!f.eps_list.empty()) c.eps_list = f.eps_list;
  if (f.no_refinement) c.refinement_check = false;
  odesens::validate(c);
  return c;
}

void print_summary(const odesens::RunSummary& s) {
  std::cout << "epsilon               " << s.epsilon << "\n"
            << "true L2 error         " << s.true_l2_error << "\n"
            << "sensitivity estimate  " << s.sensitivity_estimate << "\n"
            << "worst-case bound      " << s.state_bound << "\n"
            << "gronwall E(tf)        " << s.gronwall_final << (s.gronwall_capped ? " (capped)" : "") << "\n"
            << "QoI true error        " << s.qoi_true_error << "\n"
            << "QoI adjoint estimate  " << s.qoi_adjoint_estimate << "\n"
            << "QoI bound             " << s.qoi_bound << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensitivity analysis and error bounds for ODEs with inexact components"};
  app.require_subcommand(1);
  Flags f;

  auto* run = app.add_subcommand("run", "single perturbation study");
  add_common(run, f);
  run->add_option("--epsilon", f.epsilon, "perturbation size");
  run->add_option("--out", f.out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "studies over a list of perturbation sizes");
  add_common(sweep, f);
  sweep->add_option("--eps-list", f.eps_list, "comma-separated epsilons")->delimiter(',');
  sweep->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  sweep->add_option("--out", f.out, "output directory");

  auto* check = app.add_subcommand("check", "finite-difference check of model derivatives");
  add_common(check, f);
  check->add_option("--epsilon", f.epsilon, "perturbation size");
  check->add_option("--probes", f.probes, "probe points along the true trajectory");
  check->add_option("--tol", f.check_tol, "largest acceptable relative mismatch");
  check->add_option("--out", f.out, "write the report as JSON to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const odesens::ProblemConfig config = make_config(f);

    if (run->parsed()) {
      const auto art = odesens::run_problem(config);
      if (!config.out_dir.empty()) art.write(config.out_dir);
      print_summary(*art.runs.front().summary);
      return EXIT_SUCCESS;
    }

    if (sweep->parsed()) {
      if (config.eps_list.empty()) {
        throw odesens::ConfigError("sweep needs --eps-list or eps_list in the config");
      }
      const auto art = odesens::epsilon_sweep(config, config.eps_list);
      if (!config.out_dir.empty()) art.write(config.out_dir);
      std::cout << art.table("sweep.csv").str();
      if (art.failures == art.runs.size()) return kExitNumerical;
      return art.failures > 0 ? kExitPartial : EXIT_SUCCESS;
    }

    const auto report = odesens::check_problem(config, f.probes);
    if (!config.out_dir.empty()) {
      std::ofstream out(config.out_dir);
      out << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return report["max_relative_error"].get<double>() <= f.check_tol ? EXIT_SUCCESS : kExitNumerical;
  } catch (const odesens::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const odesens::StageError& e) {
    std::cerr << "error in stage " << e.what() << "\n";
    return e.numerical() ? kExitNumerical : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
