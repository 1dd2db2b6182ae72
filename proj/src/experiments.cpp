#include "odesens/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "odesens/gronwall.hpp"
#include "odesens/sensitivity.hpp"
#include "odesens/worst_case.hpp"

namespace odesens {

namespace {

constexpr const char* kVersion = "1.0.0";

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Runs one stage, rethrowing library errors as StageError tagged with its name.
template <class F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(name, e.what(), false);
  } catch (const ValidationError& e) {
    throw StageError(name, e.what(), false);
  } catch (const DimensionError& e) {
    throw StageError(name, e.what(), false);
  } catch (const CapabilityError& e) {
    throw StageError(name, e.what(), false);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), true);
  }
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- custom problem file -------------------------------------------------

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (j.is_null()) {
    return Matrix::Zero(rows, cols);
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(what + ": expected " + std::to_string(cols) + " columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, Eigen::Index n, const std::string& what) {
  if (j.is_null()) {
    return Vector::Zero(n);
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw ConfigError(what + ": expected " + std::to_string(n) + " entries");
  }
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

// table(t) + K x, table piecewise linear in t and constant beyond its ends.
struct LookupModel {
  std::vector<double> t;
  std::vector<Vector> values;
  Matrix gain;

  [[nodiscard]] Vector table(double s) const {
    if (t.size() == 1 || s <= t.front()) {
      return values.front();
    }
    if (s >= t.back()) {
      return values.back();
    }
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const auto i = static_cast<std::size_t>(it - t.begin()) - 1;
    const double w = (s - t[i]) / (t[i + 1] - t[i]);
    return (1.0 - w) * values[i] + w * values[i + 1];
  }
  [[nodiscard]] Vector operator()(double s, const Vector& x) const { return table(s) + gain * x; }
};

LookupModel lookup_from_json(const json& j, Eigen::Index n_x, Eigen::Index n_g, const std::string& what) {
  if (!j.is_object()) {
    throw ConfigError(what + ": expected an object with \"t\" and \"values\"");
  }
  LookupModel m;
  m.t = j.at("t").get<std::vector<double>>();
  if (m.t.empty()) {
    throw ConfigError(what + ".t: empty");
  }
  for (std::size_t i = 1; i < m.t.size(); ++i) {
    if (!(m.t[i] > m.t[i - 1])) {
      throw ConfigError(what + ".t: must be strictly increasing");
    }
  }
  const json& vals = j.at("values");
  if (!vals.is_array() || vals.size() != m.t.size()) {
    throw ConfigError(what + ".values: need one row per time");
  }
  for (const auto& row : vals) {
    m.values.push_back(vector_from_json(row, n_g, what + ".values"));
  }
  m.gain = matrix_from_json(j.value("gain", json()), n_g, n_x, what + ".gain");
  return m;
}

ComponentModel component_from_lookup(LookupModel m, Eigen::Index n_x, Eigen::Index n_g) {
  ComponentModel g;
  g.n_x = n_x;
  g.n_g = n_g;
  auto shared = std::make_shared<const LookupModel>(std::move(m));
  g.value = [shared](double t, const Vector& x) { return (*shared)(t, x); };
  g.jacobian = [shared](double, const Vector&) { return shared->gain; };
  g.hessian = [n_x, n_g](double, const Vector&) {
    return std::vector<Matrix>(static_cast<std::size_t>(n_g), Matrix::Zero(n_x, n_x));
  };
  return g;
}

// ---- one run -------------------------------------------------------------

Trajectory integrate(const BenchmarkProblem& p, const ComponentModel& g, const ResolvedConfig& rc) {
  const TimeGrid grid = TimeGrid::uniform(p.t0, p.tf, rc.grid_n);
  const RhsFunction rhs = closed_loop(p.dynamics, g);
  if (rc.adaptive) {
    AdaptiveOptions opts;
    opts.rtol = rc.rtol;
    opts.atol = rc.atol;
    return integrate_ivp(rhs, p.x0, grid, opts);
  }
  return integrate_ivp(rhs, p.x0, grid);
}

struct SingleRun {
  RunSummary summary;
  CsvTable trajectories;
  CsvTable bounds;
  CsvTable qoi;
  json diagnostics;
  json timings;
};

std::vector<std::string> prefixed(const std::string& prefix, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) {
    out.push_back(prefix + n);
  }
  return out;
}

SingleRun run_single(const ResolvedConfig& rc, const BenchmarkProblem& p) {
  const double eps = rc.base.epsilon;
  json timings = json::object();
  auto timed = [&](const std::string& name, auto&& fn) {
    const auto start = Clock::now();
    auto result = stage(name, fn);
    timings[name] = elapsed_ms(start);
    return result;
  };

  const Trajectory x_eps = timed("integrate_eps", [&] { return integrate(p, p.g_eps, rc); });
  const Trajectory x_star = timed("integrate_star", [&] { return integrate(p, p.g_star, rc); });
  const TimeGrid& grid = x_eps.grid;

  const Residual res_eps = stage("residual", [&] { return residual_psi(x_eps, p.dynamics, p.g_eps, p.x0); });
  const Residual res_star = stage("residual", [&] { return residual_psi(x_star, p.dynamics, p.g_star, p.x0); });

  const LinearizedSystem lin = timed("linearize", [&] { return linearize(p.dynamics, p.g_eps, x_eps); });
  const DeviationReport dev = stage("deviation", [&] {
    return model_deviation(p.g_eps, p.g_star, x_eps, std::optional<ErrorEnvelope>(p.envelope));
  });
  const std::vector<Vector>& eps_along = dev.envelope;

  const SensitivityResult sens = timed("sensitivity", [&] {
    return solve_sensitivity(lin, dev.delta, "g_eps - g_star along x_eps");
  });
  const Trajectory err = stage("difference", [&] { return difference(x_eps, x_star); });

  StateBoundOptions sopts;
  sopts.qp.restarts = rc.base.restarts;
  sopts.qp.max_iters = rc.base.max_iters;
  sopts.qp.seed = rc.base.seed;
  sopts.refinement_check = rc.base.refinement_check;
  const BoundReport sbound = timed("state_bound", [&] { return state_error_bound(lin, eps_along, sopts); });

  const LogLipschitzSignal llip = timed("log_lipschitz", [&] {
    return log_lipschitz_along(p.dynamics, p.g_star, x_eps, Matrix::Identity(p.dynamics.n_x, p.dynamics.n_x));
  });
  std::vector<double> eps_scalar;
  eps_scalar.reserve(eps_along.size());
  for (const auto& e : eps_along) {
    eps_scalar.push_back(e.norm());
  }
  const GronwallReport gron = timed("gronwall", [&] {
    return gronwall_state_bound(llip, eps_scalar, rc.lipschitz, rc.base.cap);
  });

  const double q_eps = stage("qoi", [&] { return evaluate_qoi(p.qoi, x_eps, p.g_eps); });
  const double q_star = stage("qoi", [&] { return evaluate_qoi(p.qoi, x_star, p.g_star); });
  const AdjointResult adj = timed("adjoint", [&] { return solve_adjoint(lin, p.qoi, x_eps, p.g_eps); });
  const double q_est = stage("adjoint", [&] {
    return qoi_directional_derivative(adj, lin, p.qoi, x_eps, p.g_eps, dev.delta);
  });
  const BoundReport qbound = timed("qoi_bound", [&] {
    return qoi_error_bound(adj, lin, p.qoi, x_eps, p.g_eps, eps_along);
  });

  SingleRun out{RunSummary{}, CsvTable({}), CsvTable({}), CsvTable({}), json::object(), json::object()};
  RunSummary& s = out.summary;
  s.epsilon = eps;
  s.true_l2_error = state_error_norm(err);
  s.sensitivity_estimate = state_error_norm(sens.delta_x);
  s.state_bound = sbound.value;
  s.state_bound_refined = sbound.diagnostics.refined_value;
  s.gronwall_final = gron.bound.back();
  s.gronwall_capped = gron.capped;
  const double log_cap = std::log(rc.base.cap);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (gron.log_bound[i] > log_cap) {
      s.gronwall_cap_time = grid[i];
      break;
    }
  }
  s.qoi_eps = q_eps;
  s.qoi_star = q_star;
  s.qoi_true_error = std::abs(q_eps - q_star);
  s.qoi_adjoint_estimate = q_est;
  s.qoi_bound = qbound.value;
  s.residual_eps = res_eps.equation;
  s.residual_star = res_star.equation;
  s.qp_starts = sbound.diagnostics.starts;
  s.qp_iterations = sbound.diagnostics.iterations;
  s.qp_converged = sbound.diagnostics.converged;

  // trajectories.csv
  std::vector<std::string> header{"t"};
  for (const auto& h : prefixed("x_eps_", p.state_names)) header.push_back(h);
  for (const auto& h : prefixed("x_star_", p.state_names)) header.push_back(h);
  header.emplace_back("err_norm");
  out.trajectories = CsvTable(header);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> row{grid[i]};
    for (Eigen::Index k = 0; k < x_eps.dim(); ++k) {
      row.push_back(x_eps.states[i][k] * p.display_scale[static_cast<std::size_t>(k)]);
    }
    for (Eigen::Index k = 0; k < x_star.dim(); ++k) {
      row.push_back(x_star.states[i][k] * p.display_scale[static_cast<std::size_t>(k)]);
    }
    row.push_back(err.states[i].norm());
    out.trajectories.add_row(row);
  }

  // bounds.csv
  out.bounds = CsvTable({"t", "bound_dx_norm", "estimate_dx_norm", "true_error_norm", "gronwall_E",
                         "gronwall_E_over_L", "log_lipschitz"});
  const Trajectory& worst = *sbound.delta_x;
  const double log_l = std::log(rc.lipschitz);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double e_over_l = 0.0;
    if (std::isfinite(gron.log_bound[i])) {
      e_over_l = std::min(rc.base.cap, std::exp(gron.log_bound[i] - log_l));
    }
    out.bounds.add_row(std::vector<double>{grid[i], worst.states[i].norm(), sens.delta_x.states[i].norm(),
                                           err.states[i].norm(), gron.bound[i], e_over_l, llip.values[i]});
  }

  // qoi.csv
  out.qoi = CsvTable({"epsilon", "qoi_eps", "qoi_star", "true_error", "adjoint_estimate",
                      "adjoint_estimate_abs", "bound"});
  out.qoi.add_row(std::vector<double>{eps, q_eps, q_star, s.qoi_true_error, q_est, std::abs(q_est),
                                      qbound.value});

  json& d = out.diagnostics;
  d["grid_nodes"] = grid.size();
  d["residual_eps"] = {{"equation", res_eps.equation}, {"initial", res_eps.initial}};
  d["residual_star"] = {{"equation", res_star.equation}, {"initial", res_star.initial}};
  d["envelope_violations"] = dev.violations.size();
  d["state_bound"] = {{"value", sbound.value},
                      {"starts", sbound.diagnostics.starts},
                      {"iterations", sbound.diagnostics.iterations},
                      {"converged", sbound.diagnostics.converged},
                      {"objective_history", sbound.diagnostics.objective_history},
                      {"refined_value", optional_json(sbound.diagnostics.refined_value)},
                      {"refinement_delta", optional_json(sbound.diagnostics.refinement_delta)}};
  d["gronwall"] = {{"lipschitz", rc.lipschitz},
                   {"cap", rc.base.cap},
                   {"capped", gron.capped},
                   {"cap_time", optional_json(s.gronwall_cap_time)},
                   {"final", s.gronwall_final}};
  d["summary"] = {{"true_l2_error", s.true_l2_error},
                  {"sensitivity_estimate", s.sensitivity_estimate},
                  {"state_bound", s.state_bound},
                  {"qoi_true_error", s.qoi_true_error},
                  {"qoi_adjoint_estimate", s.qoi_adjoint_estimate},
                  {"qoi_bound", s.qoi_bound}};
  out.timings = timings;
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json base_manifest(const ResolvedConfig& rc) {
  return json{{"tool", "odesens"}, {"version", kVersion}, {"created_utc", utc_timestamp()},
              {"config", to_json(rc)}};
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Zermelo:
      return "zermelo";
    case ProblemKind::Hypersonic:
      return "hypersonic";
    case ProblemKind::CustomFile:
      return "custom";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "zermelo") return ProblemKind::Zermelo;
  if (name == "hypersonic") return ProblemKind::Hypersonic;
  if (name == "custom") return ProblemKind::CustomFile;
  throw ConfigError("unknown problem '" + name + "' (expected zermelo, hypersonic or custom)");
}

ProblemConfig config_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  static const std::vector<std::string> known{
      "problem", "custom_file", "epsilon", "grid_n", "rtol", "atol", "lipschitz", "cap", "restarts",
      "max_iters", "seed", "refinement_check", "threads", "out", "eps_list"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  ProblemConfig c;
  try {
    if (j.contains("problem")) c.problem = parse_problem_kind(j["problem"].get<std::string>());
    if (j.contains("custom_file")) c.custom_file = j["custom_file"].get<std::string>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("grid_n")) c.grid_n = j["grid_n"].get<std::size_t>();
    if (j.contains("rtol")) c.rtol = j["rtol"].get<double>();
    if (j.contains("atol")) c.atol = j["atol"].get<double>();
    if (j.contains("lipschitz")) c.lipschitz = j["lipschitz"].get<double>();
    if (j.contains("cap")) c.cap = j["cap"].get<double>();
    if (j.contains("restarts")) c.restarts = j["restarts"].get<std::size_t>();
    if (j.contains("max_iters")) c.max_iters = j["max_iters"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("refinement_check")) c.refinement_check = j["refinement_check"].get<bool>();
    if (j.contains("threads")) c.threads = j["threads"].get<std::size_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("eps_list")) c.eps_list = j["eps_list"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

json to_json(const ResolvedConfig& c) {
  json j{{"problem", to_string(c.base.problem)},
         {"epsilon", c.base.epsilon},
         {"grid_n", c.grid_n},
         {"integrator", c.adaptive ? "dopri5" : "rk4"},
         {"lipschitz", c.lipschitz},
         {"cap", c.base.cap},
         {"restarts", c.base.restarts},
         {"max_iters", c.base.max_iters},
         {"seed", c.base.seed},
         {"refinement_check", c.base.refinement_check},
         {"threads", c.threads}};
  if (c.adaptive) {
    j["rtol"] = c.rtol;
    j["atol"] = c.atol;
  }
  if (!c.base.custom_file.empty()) j["custom_file"] = c.base.custom_file;
  if (!c.base.out_dir.empty()) j["out"] = c.base.out_dir;
  if (!c.base.eps_list.empty()) j["eps_list"] = c.base.eps_list;
  return j;
}

void validate(const ProblemConfig& c) {
  if (!std::isfinite(c.epsilon)) throw ConfigError("epsilon must be finite");
  if (c.grid_n && *c.grid_n < 2) throw ConfigError("grid_n must be at least 2");
  if (c.rtol && !(*c.rtol > 0.0)) throw ConfigError("rtol must be positive");
  if (c.atol && !(*c.atol > 0.0)) throw ConfigError("atol must be positive");
  if (c.lipschitz && !(*c.lipschitz > 0.0 && std::isfinite(*c.lipschitz))) {
    throw ConfigError("lipschitz must be positive and finite");
  }
  if (!(c.cap > 0.0)) throw ConfigError("cap must be positive");
  if (c.max_iters == 0) throw ConfigError("max_iters must be positive");
  if (c.problem == ProblemKind::CustomFile && c.custom_file.empty()) {
    throw ConfigError("problem 'custom' needs custom_file");
  }
  for (double e : c.eps_list) {
    if (!std::isfinite(e)) throw ConfigError("eps_list entries must be finite");
  }
}

BenchmarkProblem load_custom_problem(const std::filesystem::path& path, double epsilon) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open custom problem file " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("custom problem file: " + std::string(e.what()));
  }
  try {
    BenchmarkProblem p;
    p.name = j.value("name", std::string("custom"));
    const auto x0 = j.at("x0").get<std::vector<double>>();
    const auto n_x = static_cast<Eigen::Index>(x0.size());
    if (n_x == 0) throw ConfigError("custom problem: x0 is empty");
    const auto n_g = static_cast<Eigen::Index>(j.at("n_g").get<std::size_t>());
    if (n_g == 0) throw ConfigError("custom problem: n_g must be positive");
    p.x0 = Eigen::Map<const Vector>(x0.data(), n_x);
    p.t0 = j.value("t0", 0.0);
    p.tf = j.at("tf").get<double>();
    if (!(p.tf > p.t0)) throw ConfigError("custom problem: tf must exceed t0");

    const Matrix m = matrix_from_json(j.at("M"), n_x, n_x, "M");
    const Matrix nmat = matrix_from_json(j.at("N"), n_x, n_g, "N");
    const Vector c = vector_from_json(j.value("c", json()), n_x, "c");
    p.dynamics.n_x = n_x;
    p.dynamics.n_g = n_g;
    p.dynamics.rhs = [m, nmat, c](double, const Vector& x, const Vector& g) {
      return (m * x + nmat * g + c).eval();
    };
    p.dynamics.jac_x = [m](double, const Vector&, const Vector&) { return m; };
    p.dynamics.jac_g = [nmat](double, const Vector&, const Vector&) { return nmat; };

    const LookupModel star = lookup_from_json(j.at("g_star"), n_x, n_g, "g_star");
    const LookupModel pert = lookup_from_json(j.at("perturbation"), n_x, n_g, "perturbation");
    LookupModel eps_model = star;
    {
      // g_eps shares g_star's time nodes plus the perturbation's, so both tables stay exact.
      std::vector<double> t = star.t;
      t.insert(t.end(), pert.t.begin(), pert.t.end());
      std::sort(t.begin(), t.end());
      t.erase(std::unique(t.begin(), t.end()), t.end());
      eps_model.t = t;
      eps_model.values.clear();
      for (double s : t) {
        eps_model.values.push_back(star.table(s) + epsilon * pert.table(s));
      }
      eps_model.gain = star.gain + epsilon * pert.gain;
    }
    p.g_star = component_from_lookup(star, n_x, n_g);
    p.g_eps = component_from_lookup(eps_model, n_x, n_g);
    p.envelope.n_g = n_g;
    p.envelope.bound = [pert, epsilon](double t, const Vector& x) {
      return (epsilon * pert(t, x)).cwiseAbs().eval();
    };

    const Vector w = vector_from_json(j.at("qoi_weights"), n_x, "qoi_weights");
    p.qoi.terminal = [w](const Vector& x) { return w.dot(x); };
    p.qoi.terminal_grad = [w](const Vector&) { return w; };

    p.lipschitz = j.value("lipschitz", 1.0);
    if (j.contains("state_names")) {
      p.state_names = j["state_names"].get<std::vector<std::string>>();
      if (static_cast<Eigen::Index>(p.state_names.size()) != n_x) {
        throw ConfigError("custom problem: state_names length must match x0");
      }
    } else {
      for (Eigen::Index i = 0; i < n_x; ++i) p.state_names.push_back("x" + std::to_string(i + 1));
    }
    p.display_scale.assign(static_cast<std::size_t>(n_x), 1.0);
    return p;
  } catch (const json::exception& e) {
    throw ConfigError("custom problem file: " + std::string(e.what()));
  }
}

BenchmarkProblem build_problem(const ProblemConfig& c, double epsilon) {
  switch (c.problem) {
    case ProblemKind::Zermelo:
      return build_zermelo(epsilon);
    case ProblemKind::Hypersonic:
      return build_hypersonic(epsilon);
    case ProblemKind::CustomFile:
      return load_custom_problem(c.custom_file, epsilon);
  }
  throw ConfigError("unknown problem kind");
}

BenchmarkProblem build_problem(const ProblemConfig& c) { return build_problem(c, c.epsilon); }

ResolvedConfig resolve(const ProblemConfig& c, const BenchmarkProblem& p) {
  ResolvedConfig r;
  r.base = c;
  const bool hyper = c.problem == ProblemKind::Hypersonic;
  r.grid_n = c.grid_n.value_or(hyper ? 2000 : 1000);
  r.adaptive = c.rtol.has_value() || c.atol.has_value() || (hyper && !c.grid_n.has_value());
  r.rtol = c.rtol.value_or(1e-8);
  r.atol = c.atol.value_or(1e-10);
  r.lipschitz = c.lipschitz.value_or(p.lipschitz);
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  r.threads = c.threads == 0 ? hw : c.threads;
  return r;
}

const CsvTable& RunArtifacts::table(const std::string& name) const {
  for (const auto& [n, t] : tables) {
    if (n == name) return t;
  }
  throw RangeError("no table named " + name);
}

void RunArtifacts::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, t] : tables) {
    t.write(dir / name);
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
  if (!out) {
    throw Error("failed to write " + (dir / "manifest.json").string());
  }
}

RunArtifacts run_problem(const ProblemConfig& config) {
  validate(config);
  const auto start = Clock::now();
  const BenchmarkProblem p = stage("build_problem", [&] { return build_problem(config); });
  RunArtifacts art;
  art.config = resolve(config, p);
  SingleRun run = run_single(art.config, p);
  art.tables = {{"trajectories.csv", std::move(run.trajectories)},
                {"bounds.csv", std::move(run.bounds)},
                {"qoi.csv", std::move(run.qoi)}};
  art.runs.push_back(RunOutcome{config.epsilon, run.summary, {}});
  art.manifest = base_manifest(art.config);
  run.timings["total"] = elapsed_ms(start);
  art.manifest["timings_ms"] = run.timings;
  art.manifest["diagnostics"] = run.diagnostics;
  art.manifest["files"] = {"trajectories.csv", "bounds.csv", "qoi.csv"};
  return art;
}

RunArtifacts epsilon_sweep(const ProblemConfig& config, std::vector<double> eps_list) {
  validate(config);
  if (eps_list.empty()) {
    throw ConfigError("sweep needs at least one epsilon");
  }
  std::sort(eps_list.begin(), eps_list.end());
  eps_list.erase(std::unique(eps_list.begin(), eps_list.end()), eps_list.end());
  for (double e : eps_list) {
    if (!std::isfinite(e)) throw ConfigError("eps_list entries must be finite");
  }
  const auto start = Clock::now();
  const BenchmarkProblem p0 = stage("build_problem", [&] { return build_problem(config); });

  RunArtifacts art;
  art.config = resolve(config, p0);
  art.config.base.eps_list = eps_list;
  art.runs.resize(eps_list.size());
  std::vector<json> diagnostics(eps_list.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < eps_list.size(); i = next++) {
      RunOutcome& o = art.runs[i];
      o.epsilon = eps_list[i];
      try {
        ResolvedConfig rc = art.config;
        rc.base.epsilon = eps_list[i];
        const BenchmarkProblem p = build_problem(rc.base, eps_list[i]);
        SingleRun r = run_single(rc, p);
        o.summary = r.summary;
        diagnostics[i] = r.diagnostics;
      } catch (const std::exception& e) {
        o.error = e.what();
        diagnostics[i] = json{{"error", o.error}};
      }
    }
  };
  const std::size_t n_threads = std::min(art.config.threads, eps_list.size());
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n_threads; ++k) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) {
    t.join();
  }

  CsvTable sweep({"epsilon", "true_l2_error", "sensitivity_estimate", "state_bound", "true_qoi_error",
                  "adjoint_qoi_estimate", "qoi_bound", "gronwall_final", "status"});
  for (const auto& o : art.runs) {
    if (o.summary) {
      const RunSummary& s = *o.summary;
      sweep.add_row({format_double(o.epsilon), format_double(s.true_l2_error),
                     format_double(s.sensitivity_estimate), format_double(s.state_bound),
                     format_double(s.qoi_true_error), format_double(std::abs(s.qoi_adjoint_estimate)),
                     format_double(s.qoi_bound), format_double(s.gronwall_final), "ok"});
    } else {
      ++art.failures;
      sweep.add_row({format_double(o.epsilon), "", "", "", "", "", "", "", "failed: " + o.error});
    }
  }
  art.tables = {{"sweep.csv", std::move(sweep)}};
  art.manifest = base_manifest(art.config);
  json runs = json::array();
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    runs.push_back(json{{"epsilon", eps_list[i]}, {"diagnostics", diagnostics[i]}});
  }
  art.manifest["runs"] = runs;
  art.manifest["failures"] = art.failures;
  art.manifest["timings_ms"] = {{"total", elapsed_ms(start)}};
  art.manifest["files"] = {"sweep.csv"};
  return art;
}

json check_problem(const ProblemConfig& config, std::size_t probes) {
  validate(config);
  const BenchmarkProblem p = stage("build_problem", [&] { return build_problem(config); });
  const ResolvedConfig rc = resolve(config, p);
  const Trajectory x_star = stage("integrate_star", [&] { return integrate(p, p.g_star, rc); });

  std::vector<ProbePoint> pts;
  const std::size_t n = x_star.size();
  const std::size_t count = std::max<std::size_t>(1, std::min(probes, n));
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = count == 1 ? 0 : k * (n - 1) / (count - 1);
    const double t = x_star.grid[i];
    pts.push_back(ProbePoint{t, x_star.states[i], p.g_star.value(t, x_star.states[i])});
  }
  json report = json::object();
  auto add = [&](const std::string& name, const DerivativeReport& r) {
    json entry = json::object();
    for (const auto& [k, v] : r.worst) entry[k] = v;
    report[name] = entry;
  };
  stage("check", [&] {
    add("dynamics", check_derivatives(p.dynamics, pts));
    add("g_star", check_derivatives(p.g_star, pts));
    add("g_eps", check_derivatives(p.g_eps, pts));
    add("qoi", check_derivatives(p.qoi, pts));
    return 0;
  });
  double worst = 0.0;
  for (const auto& [_, entry] : report.items()) {
    for (const auto& [__, v] : entry.items()) worst = std::max(worst, v.get<double>());
  }
  return json{{"problem", p.name}, {"probes", pts.size()}, {"max_relative_error", worst}, {"models", report}};
}

}  // namespace odesens
