#include "odesens/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "odesens/errors.hpp"

namespace odesens {

namespace {

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " has shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
       << cols;
    throw DimensionError(os.str());
  }
}

void require_size(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " has dimension " << v.size() << ", expected " << n;
    throw DimensionError(os.str());
  }
}

void check_compatible(const DynamicsModel& f, const ComponentModel& g) {
  if (f.n_x != g.n_x || f.n_g != g.n_g) {
    std::ostringstream os;
    os << "dynamics (n_x=" << f.n_x << ", n_g=" << f.n_g << ") and component model (n_x=" << g.n_x
       << ", n_g=" << g.n_g << ") disagree";
    throw DimensionError(os.str());
  }
}

double rel_mismatch(double fd, double analytic) {
  return std::abs(fd - analytic) / std::max(1.0, std::abs(analytic));
}

void record(DerivativeReport& rep, const std::string& key, double value) {
  auto [it, inserted] = rep.worst.emplace(key, value);
  if (!inserted) {
    it->second = std::max(it->second, value);
  }
}

}  // namespace

Vector eval_rhs(const DynamicsModel& f, const ComponentModel& g, double t, const Vector& x) {
  check_compatible(f, g);
  require_size(x, f.n_x, "state");
  const Vector gv = g.value(t, x);
  require_size(gv, g.n_g, "component value");
  Vector dx = f.rhs(t, x, gv);
  require_size(dx, f.n_x, "right-hand side");
  if (!dx.allFinite() || !gv.allFinite()) {
    std::ostringstream os;
    os << "non-finite right-hand side at t = " << t;
    throw EvaluationError(os.str(), t);
  }
  return dx;
}

RhsFunction closed_loop(const DynamicsModel& f, const ComponentModel& g) {
  check_compatible(f, g);
  return [f, g](double t, const Vector& x) { return f.rhs(t, x, g.value(t, x)); };
}

Matrix closed_loop_jacobian(const DynamicsModel& f, const ComponentModel& g, double t,
                            const Vector& x) {
  const Vector gv = g.value(t, x);
  const Matrix fx = f.jac_x(t, x, gv);
  const Matrix fg = f.jac_g(t, x, gv);
  const Matrix gx = g.jacobian(t, x);
  require_shape(fx, f.n_x, f.n_x, "f_x");
  require_shape(fg, f.n_x, f.n_g, "f_g");
  require_shape(gx, g.n_g, g.n_x, "g_x");
  return fx + fg * gx;
}

LinearizedSystem linearize(const DynamicsModel& f, const ComponentModel& g,
                           const Trajectory& traj) {
  check_compatible(f, g);
  if (static_cast<Eigen::Index>(traj.dim()) != f.n_x) {
    throw DimensionError("trajectory dimension does not match the model state dimension");
  }
  std::vector<Matrix> as;
  std::vector<Matrix> bs;
  as.reserve(traj.size());
  bs.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.grid[i];
    const Vector& x = traj.states[i];
    const Vector gv = g.value(t, x);
    require_size(gv, g.n_g, "component value");
    const Matrix fx = f.jac_x(t, x, gv);
    const Matrix fg = f.jac_g(t, x, gv);
    const Matrix gx = g.jacobian(t, x);
    require_shape(fx, f.n_x, f.n_x, "f_x");
    require_shape(fg, f.n_x, f.n_g, "f_g");
    require_shape(gx, g.n_g, g.n_x, "g_x");
    as.push_back(fx + fg * gx);
    bs.push_back(fg);
  }
  return {MatrixSignal(traj.grid, std::move(as)), MatrixSignal(traj.grid, std::move(bs))};
}

double DerivativeReport::max() const {
  double m = 0.0;
  for (const auto& [key, value] : worst) {
    m = std::max(m, value);
  }
  return m;
}

DerivativeReport check_derivatives(const DynamicsModel& f, const std::vector<ProbePoint>& probes,
                                   double h) {
  DerivativeReport rep;
  for (const auto& p : probes) {
    const Matrix fx = f.jac_x(p.t, p.x, p.g);
    const Matrix fg = f.jac_g(p.t, p.x, p.g);
    require_shape(fx, f.n_x, f.n_x, "f_x");
    require_shape(fg, f.n_x, f.n_g, "f_g");
    for (Eigen::Index j = 0; j < f.n_x; ++j) {
      Vector xp = p.x;
      Vector xm = p.x;
      xp[j] += h;
      xm[j] -= h;
      const Vector col = (f.rhs(p.t, xp, p.g) - f.rhs(p.t, xm, p.g)) / (2.0 * h);
      for (Eigen::Index i = 0; i < f.n_x; ++i) {
        record(rep, "f_x", rel_mismatch(col[i], fx(i, j)));
      }
    }
    for (Eigen::Index j = 0; j < f.n_g; ++j) {
      Vector gp = p.g;
      Vector gm = p.g;
      gp[j] += h;
      gm[j] -= h;
      const Vector col = (f.rhs(p.t, p.x, gp) - f.rhs(p.t, p.x, gm)) / (2.0 * h);
      for (Eigen::Index i = 0; i < f.n_x; ++i) {
        record(rep, "f_g", rel_mismatch(col[i], fg(i, j)));
      }
    }
  }
  return rep;
}

DerivativeReport check_derivatives(const ComponentModel& g, const std::vector<ProbePoint>& probes,
                                   double h) {
  DerivativeReport rep;
  for (const auto& p : probes) {
    const Matrix gx = g.jacobian(p.t, p.x);
    require_shape(gx, g.n_g, g.n_x, "g_x");
    std::vector<Matrix> hess;
    if (g.has_hessian()) {
      hess = g.hessian(p.t, p.x);
      if (static_cast<Eigen::Index>(hess.size()) != g.n_g) {
        throw DimensionError("g_xx must provide one Hessian per output");
      }
    }
    for (Eigen::Index j = 0; j < g.n_x; ++j) {
      Vector xp = p.x;
      Vector xm = p.x;
      xp[j] += h;
      xm[j] -= h;
      const Vector col = (g.value(p.t, xp) - g.value(p.t, xm)) / (2.0 * h);
      for (Eigen::Index i = 0; i < g.n_g; ++i) {
        record(rep, "g_x", rel_mismatch(col[i], gx(i, j)));
      }
      if (!hess.empty()) {
        const Matrix dj = (g.jacobian(p.t, xp) - g.jacobian(p.t, xm)) / (2.0 * h);
        for (Eigen::Index i = 0; i < g.n_g; ++i) {
          for (Eigen::Index k = 0; k < g.n_x; ++k) {
            record(rep, "g_xx", rel_mismatch(dj(i, k), hess[static_cast<std::size_t>(i)](k, j)));
          }
        }
      }
    }
  }
  return rep;
}

DerivativeReport check_derivatives(const QoiModel& q, const std::vector<ProbePoint>& probes,
                                   double h) {
  DerivativeReport rep;
  for (const auto& p : probes) {
    const Eigen::Index n = p.x.size();
    const Vector dphi = q.terminal_grad(p.x);
    require_size(dphi, n, "terminal gradient");
    for (Eigen::Index j = 0; j < n; ++j) {
      Vector xp = p.x;
      Vector xm = p.x;
      xp[j] += h;
      xm[j] -= h;
      record(rep, "phi_x", rel_mismatch((q.terminal(xp) - q.terminal(xm)) / (2.0 * h), dphi[j]));
    }
    if (!q.has_running()) {
      continue;
    }
    const Vector lx = q.running_grad_x(p.t, p.x, p.g);
    const Vector lg = q.running_grad_g(p.t, p.x, p.g);
    require_size(lx, n, "running gradient in x");
    require_size(lg, p.g.size(), "running gradient in g");
    for (Eigen::Index j = 0; j < n; ++j) {
      Vector xp = p.x;
      Vector xm = p.x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (q.running(p.t, xp, p.g) - q.running(p.t, xm, p.g)) / (2.0 * h);
      record(rep, "l_x", rel_mismatch(fd, lx[j]));
    }
    for (Eigen::Index j = 0; j < p.g.size(); ++j) {
      Vector gp = p.g;
      Vector gm = p.g;
      gp[j] += h;
      gm[j] -= h;
      const double fd = (q.running(p.t, p.x, gp) - q.running(p.t, p.x, gm)) / (2.0 * h);
      record(rep, "l_g", rel_mismatch(fd, lg[j]));
    }
  }
  return rep;
}

DeviationReport model_deviation(const ComponentModel& g_eps, const ComponentModel& g_star,
                                const Trajectory& traj,
                                const std::optional<ErrorEnvelope>& envelope) {
  if (g_eps.n_x != g_star.n_x || g_eps.n_g != g_star.n_g) {
    throw DimensionError("component models have different dimensions");
  }
  if (envelope && envelope->n_g != g_eps.n_g) {
    throw DimensionError("envelope dimension does not match the component models");
  }
  DeviationReport rep;
  rep.delta.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.grid[i];
    const Vector& x = traj.states[i];
    const Vector ge = g_eps.value(t, x);
    const Vector gs = g_star.value(t, x);
    Vector d = ge - gs;
    require_size(d, g_eps.n_g, "component value");
    if (envelope) {
      Vector e = envelope->bound(t, x);
      require_size(e, g_eps.n_g, "envelope value");
      // Allow the rounding error of the subtraction itself.
      const Eigen::ArrayXd slack =
          4.0 * std::numeric_limits<double>::epsilon() * (ge.array().abs() + gs.array().abs());
      if ((d.array().abs() > e.array() + slack).any()) {
        rep.violations.push_back(i);
      }
      rep.envelope.push_back(std::move(e));
    }
    rep.delta.push_back(std::move(d));
  }
  return rep;
}

std::vector<Vector> sample_envelope(const ErrorEnvelope& env, const Trajectory& traj) {
  std::vector<Vector> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    Vector e = env.bound(traj.grid[i], traj.states[i]);
    require_size(e, env.n_g, "envelope value");
    if ((e.array() < 0.0).any() || !e.allFinite()) {
      std::ostringstream os;
      os << "envelope is negative or non-finite at t = " << traj.grid[i];
      throw ValidationError(os.str());
    }
    out.push_back(std::move(e));
  }
  return out;
}

double gnorm_sampled(const ComponentModel& g, int k, const SampleBox& box) {
  if (k < 0 || k > 2) {
    throw ValidationError("gnorm_sampled supports k in {0, 1, 2}");
  }
  if (k == 2 && !g.has_hessian()) {
    throw CapabilityError("k = 2 requires second derivatives of the component model");
  }
  if (box.x_lo.size() != g.n_x || box.x_hi.size() != g.n_x) {
    throw DimensionError("sample box dimension does not match the component model");
  }
  if (box.t_count == 0 || box.x_count == 0) {
    throw ValidationError("sample counts must be positive");
  }
  auto coord = [](double lo, double hi, std::size_t i, std::size_t n) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::vector<double> sup(static_cast<std::size_t>(k) + 1, 0.0);
  const auto nx = static_cast<std::size_t>(g.n_x);
  std::size_t total = 1;
  for (std::size_t d = 0; d < nx; ++d) {
    total *= box.x_count;
  }
  Vector x(g.n_x);
  for (std::size_t it = 0; it < box.t_count; ++it) {
    const double t = coord(box.t_lo, box.t_hi, it, box.t_count);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (std::size_t d = 0; d < nx; ++d) {
        const auto di = static_cast<Eigen::Index>(d);
        x[di] = coord(box.x_lo[di], box.x_hi[di], rem % box.x_count, box.x_count);
        rem /= box.x_count;
      }
      sup[0] = std::max(sup[0], g.value(t, x).norm());
      if (k >= 1) {
        sup[1] = std::max(sup[1], g.jacobian(t, x).norm());
      }
      if (k >= 2) {
        double acc = 0.0;
        for (const auto& hm : g.hessian(t, x)) {
          acc += hm.squaredNorm();
        }
        sup[2] = std::max(sup[2], std::sqrt(acc));
      }
    }
  }
  double total_norm = 0.0;
  for (double s : sup) {
    total_norm += s;
  }
  return total_norm;
}

}  // namespace odesens
