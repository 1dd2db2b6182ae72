#include "odesens/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "odesens/errors.hpp"

namespace odesens {

namespace {

void require_on_grid(const TimeGrid& grid, std::size_t samples, const char* what) {
  if (samples != grid.size()) {
    std::ostringstream os;
    os << what << ": " << samples << " samples for a grid of " << grid.size() << " nodes";
    throw DimensionError(os.str());
  }
}

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": trajectories live on different grids");
  }
}

// grad_x l + g_x^T grad_g l at node i.
Vector running_state_gradient(const QoiModel& q, const ComponentModel& g, double t,
                              const Vector& x) {
  const Vector gv = g.value(t, x);
  return q.running_grad_x(t, x, gv) + g.jacobian(t, x).transpose() * q.running_grad_g(t, x, gv);
}

}  // namespace

SensitivityResult solve_sensitivity(const LinearizedSystem& lin, const std::vector<Vector>& dg_along,
                                    std::string source_direction) {
  const TimeGrid& grid = lin.grid();
  require_on_grid(grid, dg_along.size(), "solve_sensitivity");
  std::vector<Vector> forcing;
  forcing.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (dg_along[i].size() != lin.n_g()) {
      throw DimensionError("solve_sensitivity: delta_g sample has wrong dimension");
    }
    forcing.push_back(lin.b[i] * dg_along[i]);
  }
  Trajectory dx = solve_linear_forward(lin.a, piecewise_linear(grid, std::move(forcing)),
                                       Vector::Zero(lin.n_x()));
  return {std::move(dx), std::move(source_direction)};
}

double evaluate_qoi(const QoiModel& q, const Trajectory& traj, const ComponentModel& g) {
  double value = q.terminal(traj.terminal());
  if (!q.has_running()) {
    return value;
  }
  std::vector<double> samples(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.grid[i];
    const Vector& x = traj.states[i];
    samples[i] = q.running(t, x, g.value(t, x));
    if (!std::isfinite(samples[i])) {
      std::ostringstream os;
      os << "non-finite running cost at t = " << t;
      throw EvaluationError(os.str(), t);
    }
  }
  return value + quadrature(traj.grid, samples);
}

AdjointResult solve_adjoint(const LinearizedSystem& lin, const QoiModel& q, const Trajectory& traj,
                            const ComponentModel& g) {
  require_same_grid(lin.grid(), traj.grid, "solve_adjoint");
  const Vector terminal = q.terminal_grad(traj.terminal());
  if (terminal.size() != lin.n_x()) {
    throw DimensionError("solve_adjoint: terminal gradient has wrong dimension");
  }
  VectorSignal forcing;
  if (q.has_running()) {
    std::vector<Vector> samples;
    samples.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
      samples.push_back(running_state_gradient(q, g, traj.grid[i], traj.states[i]));
    }
    forcing = piecewise_linear(traj.grid, std::move(samples));
  } else {
    forcing = constant_signal(Vector::Zero(lin.n_x()));
  }
  Trajectory lambda = solve_linear_backward(lin.a, forcing, terminal);
  lambda.states.back() = terminal;
  return {std::move(lambda)};
}

std::vector<Vector> qoi_weight(const AdjointResult& adj, const LinearizedSystem& lin,
                               const QoiModel& q, const Trajectory& traj,
                               const ComponentModel& g) {
  require_same_grid(lin.grid(), traj.grid, "qoi_weight");
  require_same_grid(adj.lambda.grid, traj.grid, "qoi_weight");
  std::vector<Vector> w;
  w.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    Vector wi = lin.b[i].transpose() * adj.lambda.states[i];
    if (q.has_running()) {
      const double t = traj.grid[i];
      const Vector& x = traj.states[i];
      wi += q.running_grad_g(t, x, g.value(t, x));
    }
    w.push_back(std::move(wi));
  }
  return w;
}

double qoi_directional_derivative(const AdjointResult& adj, const LinearizedSystem& lin,
                                  const QoiModel& q, const Trajectory& traj,
                                  const ComponentModel& g, const std::vector<Vector>& dg_along) {
  require_on_grid(traj.grid, dg_along.size(), "qoi_directional_derivative");
  const std::vector<Vector> w = qoi_weight(adj, lin, q, traj, g);
  std::vector<double> samples(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    samples[i] = w[i].dot(dg_along[i]);
  }
  return quadrature(traj.grid, samples);
}

double qoi_derivative_forward(const SensitivityResult& sens, const QoiModel& q,
                              const Trajectory& traj, const ComponentModel& g,
                              const std::vector<Vector>& dg_along) {
  require_same_grid(sens.delta_x.grid, traj.grid, "qoi_derivative_forward");
  require_on_grid(traj.grid, dg_along.size(), "qoi_derivative_forward");
  double value = q.terminal_grad(traj.terminal()).dot(sens.delta_x.terminal());
  if (!q.has_running()) {
    return value;
  }
  std::vector<double> samples(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.grid[i];
    const Vector& x = traj.states[i];
    samples[i] = running_state_gradient(q, g, t, x).dot(sens.delta_x.states[i]) +
                 q.running_grad_g(t, x, g.value(t, x)).dot(dg_along[i]);
  }
  return value + quadrature(traj.grid, samples);
}

double state_error_norm(const Trajectory& delta, const MatrixSignal& q) {
  require_same_grid(delta.grid, q.grid(), "state_error_norm");
  std::vector<double> samples(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const Matrix& qi = q[i];
    if (qi.rows() != static_cast<Eigen::Index>(delta.dim()) || qi.cols() != qi.rows()) {
      throw DimensionError("state_error_norm: weight has wrong shape");
    }
    if (!is_symmetric(qi)) {
      throw ValidationError("state_error_norm: weight matrix is not symmetric");
    }
    samples[i] = delta.states[i].dot(qi * delta.states[i]);
  }
  return std::sqrt(std::max(0.0, quadrature(delta.grid, samples)));
}

double state_error_norm(const Trajectory& delta) {
  std::vector<double> samples(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    samples[i] = delta.states[i].squaredNorm();
  }
  return std::sqrt(quadrature(delta.grid, samples));
}

Trajectory difference(const Trajectory& a, const Trajectory& b) {
  require_same_grid(a.grid, b.grid, "difference");
  std::vector<Vector> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = a.states[i] - b.states[i];
  }
  std::vector<Vector> dd;
  if (a.has_derivs() && b.has_derivs()) {
    dd.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      dd[i] = a.derivs[i] - b.derivs[i];
    }
  }
  return Trajectory(a.grid, std::move(d), std::move(dd));
}

Residual residual_psi(const Trajectory& traj, const DynamicsModel& f, const ComponentModel& g,
                      const Vector& x0) {
  if (!traj.has_derivs()) {
    throw ValidationError("residual_psi requires derivative samples");
  }
  Residual r;
  r.initial = (traj.initial() - x0).norm();
  // Nodes and interval midpoints of the Hermite interpolant.
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.grid[i];
    const Vector res = traj.derivs[i] - f.rhs(t, traj.states[i], g.value(t, traj.states[i]));
    r.equation = std::max(r.equation, res.lpNorm<Eigen::Infinity>());
  }
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double h = traj.grid.step(i);
    const double t = traj.grid[i] + 0.5 * h;
    const Vector xm = interpolate(traj, t);
    // Hermite derivative at s = 1/2.
    const Vector dxm = 1.5 * (traj.states[i + 1] - traj.states[i]) / h -
                       0.25 * (traj.derivs[i] + traj.derivs[i + 1]);
    const Vector res = dxm - f.rhs(t, xm, g.value(t, xm));
    r.equation = std::max(r.equation, res.lpNorm<Eigen::Infinity>());
  }
  return r;
}

}  // namespace odesens
