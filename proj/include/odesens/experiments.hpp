/**
 * @file experiments.hpp
 * @brief Experiment drivers: single perturbation runs and epsilon sweeps over
 *        the built-in problems, with CSV/JSON artifact emission.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "odesens/benchmarks.hpp"
#include "odesens/csv.hpp"
#include "odesens/errors.hpp"

namespace odesens {

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure inside one stage of a run; `stage()` names it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message, bool numerical)
      : Error(stage + ": " + message), stage_(std::move(stage)), numerical_(numerical) {}
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
  [[nodiscard]] bool numerical() const noexcept { return numerical_; }

 private:
  std::string stage_;
  bool numerical_;
};

enum class ProblemKind { Zermelo, Hypersonic, CustomFile };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& name);

struct ProblemConfig {
  ProblemKind problem = ProblemKind::Zermelo;
  std::string custom_file;
  double epsilon = 0.1;
  std::optional<std::size_t> grid_n;  // number of grid nodes
  std::optional<double> rtol;         // set either tolerance to integrate adaptively
  std::optional<double> atol;
  std::optional<double> lipschitz;
  double cap = 1e10;
  std::size_t restarts = 8;
  std::size_t max_iters = 2000;
  std::uint64_t seed = 42;
  bool refinement_check = true;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::string out_dir;
  std::vector<double> eps_list;
};

/// Config with every default filled in; this is what the manifest echoes.
struct ResolvedConfig {
  ProblemConfig base;
  std::size_t grid_n = 0;
  bool adaptive = false;
  double rtol = 1e-8;
  double atol = 1e-10;
  double lipschitz = 1.0;
  std::size_t threads = 1;
};

ProblemConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResolvedConfig& c);

/// Throws ConfigError on invalid settings.
void validate(const ProblemConfig& c);

BenchmarkProblem build_problem(const ProblemConfig& c);
BenchmarkProblem build_problem(const ProblemConfig& c, double epsilon);
ResolvedConfig resolve(const ProblemConfig& c, const BenchmarkProblem& p);

/// Problem from a declarative file:
///   f(t, x, g) = M x + N g + c
///   g_star(t, x) = table(t) + K x   (table: piecewise linear in t)
///   g_eps = g_star + epsilon * perturbation,  perturbation = table(t) + K x
///   envelope = |epsilon * perturbation|,  QoI = w^T x(tf)
BenchmarkProblem load_custom_problem(const std::filesystem::path& path, double epsilon);

struct RunSummary {
  double epsilon = 0.0;
  double true_l2_error = 0.0;
  double sensitivity_estimate = 0.0;
  double state_bound = 0.0;
  std::optional<double> state_bound_refined;
  double gronwall_final = 0.0;
  bool gronwall_capped = false;
  std::optional<double> gronwall_cap_time;
  double qoi_eps = 0.0;
  double qoi_star = 0.0;
  double qoi_true_error = 0.0;
  double qoi_adjoint_estimate = 0.0;  // signed
  double qoi_bound = 0.0;
  double residual_eps = 0.0;
  double residual_star = 0.0;
  std::size_t qp_starts = 0;
  std::size_t qp_iterations = 0;
  bool qp_converged = true;
};

struct RunOutcome {
  double epsilon = 0.0;
  std::optional<RunSummary> summary;
  std::string error;
};

struct RunArtifacts {
  ResolvedConfig config;
  std::vector<std::pair<std::string, CsvTable>> tables;  // file name, table
  std::vector<RunOutcome> runs;
  nlohmann::json manifest;
  std::size_t failures = 0;

  [[nodiscard]] const CsvTable& table(const std::string& name) const;
  /// Writes every table plus manifest.json into `dir` (created if missing).
  void write(const std::filesystem::path& dir) const;
};

/// One perturbation study at config.epsilon.
RunArtifacts run_problem(const ProblemConfig& config);

/// Studies at every epsilon in eps_list; per-epsilon failures become marked rows.
RunArtifacts epsilon_sweep(const ProblemConfig& config, std::vector<double> eps_list);

/// Derivative validation of every model of the configured problem.
nlohmann::json check_problem(const ProblemConfig& config, std::size_t probes = 50);

}  // namespace odesens
