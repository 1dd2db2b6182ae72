// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "odesens/benchmarks.hpp"
#include "odesens/experiments.hpp"
#include "odesens/gronwall.hpp"
#include "odesens/sensitivity.hpp"
#include "odesens/worst_case.hpp"

using namespace odesens;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[violated: " << what << "] ";
    }
  }
};

Vector v1(double a) { return Vector::Constant(1, a); }

Trajectory rk4(const BenchmarkProblem& p, const ComponentModel& g, std::size_t n) {
  return integrate_ivp(closed_loop(p.dynamics, g), p.x0, TimeGrid::uniform(p.t0, p.tf, n));
}

BenchmarkProblem benchmark(const std::string& name, double eps) {
  return name == "zermelo" ? build_zermelo(eps) : build_hypersonic(eps);
}

// Production-path ingredients at one epsilon: x_eps on the default grid, its
// linearization and the deviation/envelope samples.
struct Linearized {
  BenchmarkProblem p;
  Trajectory x;
  LinearizedSystem lin;
  DeviationReport dev;
};

Linearized linearized(const std::string& name, double eps) {
  ProblemConfig c;
  c.problem = name == "zermelo" ? ProblemKind::Zermelo : ProblemKind::Hypersonic;
  BenchmarkProblem p = build_problem(c, eps);
  const ResolvedConfig rc = resolve(c, p);
  const TimeGrid grid = TimeGrid::uniform(p.t0, p.tf, rc.grid_n);
  Trajectory x = rc.adaptive ? integrate_ivp(closed_loop(p.dynamics, p.g_eps), p.x0, grid,
                                             AdaptiveOptions{rc.rtol, rc.atol})
                             : integrate_ivp(closed_loop(p.dynamics, p.g_eps), p.x0, grid);
  LinearizedSystem lin = linearize(p.dynamics, p.g_eps, x);
  DeviationReport dev = model_deviation(p.g_eps, p.g_star, x, p.envelope);
  return {std::move(p), std::move(x), std::move(lin), std::move(dev)};
}

Vector random_feasible(std::mt19937_64& rng, const Vector& bounds) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector d(bounds.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = bounds[k] * u(rng);
  return d;
}

double slope(double e0, double e1, double r0, double r1) { return std::log(r0 / r1) / std::log(e0 / e1); }

// ---------------------------------------------------------------------------

void criterion1(Outcome& o) {
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  for (const std::string name : {"zermelo", "hypersonic"}) {
    const std::size_t n = name == "zermelo" ? 2001 : 20001;
    const BenchmarkProblem p = benchmark(name, 0.0);
    const Trajectory xs = rk4(p, p.g_star, n);
    const LinearizedSystem lin = linearize(p.dynamics, p.g_star, xs);
    std::vector<double> rem;
    for (double e : eps) {
      const BenchmarkProblem pe = benchmark(name, e);
      // g_eps - g_star is exactly linear in eps on both benchmarks.
      const DeviationReport dev = model_deviation(pe.g_eps, p.g_star, xs);
      const Trajectory dx = solve_sensitivity(lin, dev.delta).delta_x;
      rem.push_back(state_error_norm(difference(difference(rk4(pe, pe.g_eps, n), xs), dx)));
    }
    o.detail << name << " slopes";
    for (std::size_t k = 0; k + 1 < eps.size(); ++k) {
      const double s = slope(eps[k], eps[k + 1], rem[k], rem[k + 1]);
      o.detail << " " << s;
      o.require(s >= 1.8, name + " slope >= 1.8");
    }
    o.detail << "; ";
  }
}

void criterion2(Outcome& o) {
  // The identity is exact for the continuous problem; the discrete forward and
  // backward solves differ at the integrator's order, so use fine grids.
  for (const std::string name : {"zermelo", "hypersonic"}) {
    const BenchmarkProblem p = benchmark(name, name == "zermelo" ? 0.05 : 0.01);
    const Trajectory x = rk4(p, p.g_eps, name == "zermelo" ? 2001 : 8001);
    const LinearizedSystem lin = linearize(p.dynamics, p.g_eps, x);
    const DeviationReport dev = model_deviation(p.g_eps, p.g_star, x);
    const AdjointResult adj = solve_adjoint(lin, p.qoi, x, p.g_eps);
    const double via_adjoint = qoi_directional_derivative(adj, lin, p.qoi, x, p.g_eps, dev.delta);
    const SensitivityResult sens = solve_sensitivity(lin, dev.delta);
    const double via_forward = qoi_derivative_forward(sens, p.qoi, x, p.g_eps, dev.delta);
    const double rel = std::abs(via_adjoint - via_forward) / std::abs(via_forward);
    o.detail << name << " rel " << rel << " on " << x.size() << " nodes; ";
    o.require(rel <= 1e-6, name + " adjoint identity");
  }
}

void criterion3(Outcome& o) {
  std::mt19937_64 rng(42);
  for (const std::string name : {"zermelo", "hypersonic"}) {
    const Linearized l = linearized(name, 1e-2);
    const CondensedBoxQP qp = build_state_bound_qp(l.lin, l.dev.envelope);
    const BoxQpResult best = maximize_box_qp(qp);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) worst = std::max(worst, qp.objective(random_feasible(rng, qp.bounds())));
    o.detail << name << " random max/bound " << worst / best.value << "; ";
    o.require(worst <= best.value, name + " random directions below the bound");
  }
  int checked = 0;
  // Coarse instances sample the production linearization on a short window.
  for (const std::string name : {"zermelo", "hypersonic"}) {
    const Linearized l = linearized(name, 0.1);
    const std::size_t nodes = name == "zermelo" ? 17 : 9;  // N * n_g = 16
    const double window = name == "zermelo" ? l.p.tf - l.p.t0 : 16.0;
    const TimeGrid g = TimeGrid::uniform(l.p.t0, l.p.t0 + window, nodes);
    std::vector<Matrix> a, b;
    std::vector<Vector> e;
    for (double t : g.nodes()) {
      a.push_back(l.lin.a.at(t));
      b.push_back(l.lin.b.at(t));
      e.push_back(l.p.envelope.bound(t, interpolate(l.x, t)));
    }
    const CondensedBoxQP qp = build_state_bound_qp({MatrixSignal(g, a), MatrixSignal(g, b)}, e);
    o.require(maximize_box_qp(qp).value == enumerate_box_qp(qp).value, name + " coarse instance equals enumeration");
    ++checked;
  }
  std::normal_distribution<double> d;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const Eigen::Index n_g = 1 + rep % 2;
    const std::size_t nodes = n_g == 1 ? 17 : 9;
    const TimeGrid g = TimeGrid::uniform(0, 1, nodes);
    std::vector<Matrix> a, b;
    std::vector<Vector> e;
    for (std::size_t i = 0; i < nodes; ++i) {
      Matrix ai(3, 3), bi(3, n_g);
      for (auto& v : ai.reshaped()) v = d(rng);
      for (auto& v : bi.reshaped()) v = d(rng);
      Vector ei(n_g);
      for (auto& v : ei) v = u(rng);
      a.push_back(ai);
      b.push_back(bi);
      e.push_back(ei);
    }
    const CondensedBoxQP qp = build_state_bound_qp({MatrixSignal(g, a), MatrixSignal(g, b)}, e);
    o.require(maximize_box_qp(qp).value == enumerate_box_qp(qp).value, "random instance equals enumeration");
    ++checked;
  }
  o.detail << checked << " instances matched enumeration; ";
}

void criterion4(Outcome& o) {
  std::mt19937_64 rng(7);
  for (const std::string name : {"zermelo", "hypersonic"}) {
    const Linearized l = linearized(name, 1e-2);
    const AdjointResult adj = solve_adjoint(l.lin, l.p.qoi, l.x, l.p.g_eps);
    const std::vector<Vector> w = qoi_weight(adj, l.lin, l.p.qoi, l.x, l.p.g_eps);
    const BoundReport b = qoi_bound_from_weight(l.x.grid, w, l.dev.envelope);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      std::vector<double> s;
      for (std::size_t i = 0; i < w.size(); ++i) {
        s.push_back(w[i].dot(random_feasible(rng, l.dev.envelope[i])));
      }
      worst = std::max(worst, std::abs(quadrature(l.x.grid, s)));
    }
    o.detail << name << " random max/bound " << worst / b.value << "; ";
    o.require(worst <= b.value, name + " random directions below the QoI bound");
  }
  const TimeGrid g = TimeGrid::uniform(0, 1, 1001);
  std::vector<Vector> w;
  for (double t : g.nodes()) w.push_back(v1(t - 0.5));
  const double closed = qoi_bound_from_weight(g, w, std::vector<Vector>(g.size(), v1(1.0))).value;
  o.detail << "w = t - 1/2 gives " << closed << "; ";
  o.require(std::abs(closed - 0.25) <= 1e-6, "closed form 0.25");
}

void criterion5(Outcome& o) {
  ProblemConfig c;
  c.problem = ProblemKind::Zermelo;
  const RunArtifacts art = epsilon_sweep(c, {1e-4, 1e-3, 1e-2, 1e-1});
  o.require(art.failures == 0, "all sweep entries succeed");
  for (const RunOutcome& r : art.runs) {
    if (!r.summary) continue;
    const RunSummary& s = *r.summary;
    const double est_ratio = s.sensitivity_estimate / s.true_l2_error;
    const double bound_ratio = s.state_bound / s.sensitivity_estimate;
    o.detail << "eps " << r.epsilon << ": est/true " << est_ratio << " bound/est " << bound_ratio << "; ";
    if (r.epsilon <= 1e-2) o.require(std::abs(est_ratio - 1.0) <= 0.1, "estimate within 10% of true error");
    o.require(bound_ratio >= 1.0 && bound_ratio <= 1.1, "bound >= estimate with ratio <= 1.1");
  }
}

void criterion6(Outcome& o) {
  ProblemConfig z;
  z.problem = ProblemKind::Zermelo;
  z.epsilon = 0.1;
  const RunArtifacts za = run_problem(z);
  const RunSummary& zs = *za.runs[0].summary;
  const CsvTable& zb = za.table("bounds.csv");
  const auto& last = zb.rows().back();
  const double bound_t1 = std::stod(last[1]);
  const double e_t1 = std::stod(last[4]);
  o.detail << "zermelo E(1) " << e_t1 << " vs |dx(1)| bound " << bound_t1 << " and L2 bound " << zs.state_bound << "; ";
  o.require(za.config.lipschitz == 4.0, "zermelo uses L = 4");
  o.require(e_t1 >= 5.0 * bound_t1 && e_t1 >= 5.0 * zs.state_bound, "zermelo Gronwall at least 5x the sensitivity bound");

  ProblemConfig h;
  h.problem = ProblemKind::Hypersonic;
  h.epsilon = 1e-2;
  const RunSummary hs = *run_problem(h).runs[0].summary;
  const double ratio = hs.state_bound / hs.true_l2_error;
  o.detail << "hypersonic cap time " << (hs.gronwall_cap_time ? *hs.gronwall_cap_time : -1.0) << " s, bound/true "
           << ratio << "; ";
  o.require(hs.gronwall_capped && hs.gronwall_cap_time && *hs.gronwall_cap_time < 20.0, "E/L reaches 1e10 before 20 s");
  o.require(std::isfinite(hs.state_bound), "hypersonic bound finite");
  o.require(ratio >= 1.0 / 3.0 && ratio <= 3.0, "hypersonic bound within 3x of true error");
}

void criterion7(Outcome& o) {
  for (ProblemKind kind : {ProblemKind::Zermelo, ProblemKind::Hypersonic}) {
    ProblemConfig c;
    c.problem = kind;
    c.refinement_check = false;
    const RunArtifacts art = epsilon_sweep(c, {1e-4, 1e-3, 1e-2});
    o.require(art.failures == 0, "all sweep entries succeed");
    for (const RunOutcome& r : art.runs) {
      if (!r.summary) continue;
      const RunSummary& s = *r.summary;
      const double vals[3] = {std::abs(s.qoi_true_error), std::abs(s.qoi_adjoint_estimate), s.qoi_bound};
      const double spread = *std::max_element(vals, vals + 3) / *std::min_element(vals, vals + 3) - 1.0;
      o.detail << to_string(kind) << " eps " << r.epsilon << ": true " << vals[0] << " est " << vals[1] << " bound "
               << vals[2] << " spread " << spread << "; ";
      o.require(spread <= 0.15, to_string(kind) + " QoI quantities within 15%");
    }
  }
}

void criterion8(Outcome& o) {
  // RK4 (order 4) on x' = 3x and fixed-step Dormand-Prince (order 5) on x' = -2x.
  auto errors = [](bool dopri, double lambda, double h0, int halvings) {
    std::vector<double> errs;
    double h = h0;
    for (int k = 0; k <= halvings; ++k, h /= 2) {
      const auto n = static_cast<std::size_t>(std::llround(1.0 / h)) + 1;
      const RhsFunction f = [lambda](double, const Vector& x) { return (lambda * x).eval(); };
      const TimeGrid g = TimeGrid::uniform(0, 1, n);
      AdaptiveOptions opts;
      opts.rtol = opts.atol = 1e30;
      opts.initial_step = opts.max_step = h;
      const Trajectory tr = dopri ? integrate_ivp(f, v1(1.0), g, opts) : integrate_ivp(f, v1(1.0), g);
      errs.push_back(std::abs(tr.terminal()[0] - std::exp(lambda)));
    }
    return errs;
  };
  const auto rk = errors(false, 3.0, 0.1, 6);
  const auto dp = errors(true, -2.0, 0.1, 4);
  double rk_min = INFINITY, dp_min = INFINITY;
  for (std::size_t k = 0; k + 1 < rk.size(); ++k) rk_min = std::min(rk_min, rk[k] / rk[k + 1]);
  for (std::size_t k = 0; k + 1 < dp.size(); ++k) dp_min = std::min(dp_min, dp[k] / dp[k + 1]);
  o.detail << "rk4 min ratio " << rk_min << ", dopri min ratio " << dp_min << "; ";
  o.require(rk_min >= std::pow(2.0, 3.5), "rk4 order");
  o.require(dp_min >= std::pow(2.0, 4.5), "dopri order");

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  double worst_identity = 0.0;
  for (int k = 0; k < 25; ++k) {
    const Eigen::Index n = 2 + k % 4;
    Matrix a(n, n), r(n, n);
    for (auto& v : a.reshaped()) v = nd(rng);
    for (auto& v : r.reshaped()) v = nd(rng);
    const Matrix q = r * r.transpose() + 0.5 * Matrix::Identity(n, n);
    const Matrix c = Eigen::LLT<Matrix>(q).matrixL();
    const Matrix similar = c.transpose() * a * c.transpose().inverse();
    worst_identity = std::max(worst_identity, std::abs(log_norm(a, q) - log_norm(similar, Matrix::Identity(n, n))));
    for (double shift : {-3.0, 0.25, 7.5}) {
      worst_identity = std::max(
          worst_identity, std::abs(log_norm(a + shift * Matrix::Identity(n, n), q) - (log_norm(a, q) + shift)));
    }
  }
  o.detail << "log_norm identity error " << worst_identity << "; ";
  o.require(worst_identity <= 1e-10, "log_norm identities");

  const TimeGrid g = TimeGrid::uniform(0, 1, 10001);
  const double e_final =
      gronwall_state_bound({g, std::vector<double>(g.size(), 1.0)}, std::vector<double>(g.size(), 1.0), 1.0).bound.back();
  o.detail << "Gronwall closed form error " << std::abs(e_final - (std::exp(1.0) - 1.0)) << "; ";
  o.require(std::abs(e_final - (std::exp(1.0) - 1.0)) <= 1e-6, "Gronwall closed form");

  const TimeGrid ng({0.0, 0.07, 0.2, 0.31, 0.5, 0.66, 0.8, 0.93, 1.0});
  std::vector<Matrix> a, ra;
  for (double t : ng.nodes()) {
    Matrix m(2, 2);
    m << std::sin(t), 1 + t, -t * t, std::cos(3 * t);
    a.push_back(m);
  }
  for (auto it = a.rbegin(); it != a.rend(); ++it) ra.push_back(it->transpose());
  const VectorSignal f = [](double t) { return (Vector(2) << std::exp(t), 1 - t).finished(); };
  const Vector vf = (Vector(2) << 0.3, -1.2).finished();
  const Trajectory back = solve_linear_backward(MatrixSignal(ng, a), f, vf);
  const double s = ng.t0() + ng.tf();
  const Trajectory fwd = solve_linear_forward(MatrixSignal(ng.reflected(), ra), [&](double t) { return f(s - t); }, vf);
  double rev = 0.0;
  for (std::size_t i = 0; i < ng.size(); ++i) rev = std::max(rev, (back.states[i] - fwd.states[ng.size() - 1 - i]).norm());
  o.detail << "time-reversal error " << rev << "; ";
  o.require(rev <= 1e-12, "time reversal");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_s;  // 0: no runtime requirement
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "Frechet remainder slope >= 1.8 on both benchmarks", 30, criterion1},
      {2, "adjoint and forward QoI derivatives agree to 1e-6", 10, criterion2},
      {3, "state bound dominates feasible directions; equals enumeration on small instances", 60, criterion3},
      {4, "QoI bound dominates feasible directions; closed form 0.25", 0, criterion4},
      {5, "Zermelo sweep: estimate within 10%, bound/estimate in [1, 1.1]", 120, criterion5},
      {6, "Gronwall pessimism on both benchmarks", 180, criterion6},
      {7, "QoI error, adjoint estimate and bound within 15% for eps <= 1e-2", 0, criterion7},
      {8, "integrator orders, log_norm identities, Gronwall closed form, time reversal", 0, criterion8},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "] ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail << "[over runtime budget of " << c.budget_s << " s] ";
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d: %s (%.1f s) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
