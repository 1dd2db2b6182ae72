#include "odesens/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "odesens/errors.hpp"

namespace odesens {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

Vector checked_rhs(const RhsFunction& rhs, double t, const Vector& x, Eigen::Index n) {
  Vector dx = rhs(t, x);
  if (dx.size() != n) {
    throw DimensionError("rhs returned a vector of dimension " + std::to_string(dx.size()) +
                         ", expected " + std::to_string(n));
  }
  if (!all_finite(dx)) {
    std::ostringstream os;
    os << "non-finite right-hand side at t = " << t;
    throw IntegrationError(os.str(), t);
  }
  return dx;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct DopriStep {
  Vector x;
  Vector dx;  // FSAL derivative at the new point
  double err;
};

DopriStep dopri_step(const RhsFunction& rhs, double t, const Vector& x, const Vector& k1, double h,
                     const AdaptiveOptions& opts) {
  const Eigen::Index n = x.size();
  const Vector k2 = checked_rhs(rhs, t + c2 * h, x + h * (a21 * k1), n);
  const Vector k3 = checked_rhs(rhs, t + c3 * h, x + h * (a31 * k1 + a32 * k2), n);
  const Vector k4 = checked_rhs(rhs, t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3), n);
  const Vector k5 =
      checked_rhs(rhs, t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), n);
  const Vector k6 =
      checked_rhs(rhs, t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), n);
  Vector x_new = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  Vector k7 = checked_rhs(rhs, t + h, x_new, n);
  const Vector e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = opts.atol + opts.rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
    acc += (e[i] / scale) * (e[i] / scale);
  }
  return {std::move(x_new), std::move(k7), std::sqrt(acc / static_cast<double>(n))};
}

double initial_step(const RhsFunction& rhs, double t0, const Vector& x0, const Vector& f0,
                    double span, const AdaptiveOptions& opts) {
  if (opts.initial_step > 0.0) {
    return std::min(opts.initial_step, span);
  }
  const Vector scale = (opts.atol + opts.rtol * x0.array().abs()).matrix();
  const double d0 = std::sqrt((x0.array() / scale.array()).square().mean());
  const double d1 = std::sqrt((f0.array() / scale.array()).square().mean());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  const Vector f1 = checked_rhs(rhs, t0 + h0, x0 + h0 * f0, x0.size());
  const double d2 = std::sqrt(((f1 - f0).array() / scale.array()).square().mean()) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                              : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span, opts.max_step});
}

// Advances from (t, x) with derivative dx to exactly t_end, appending every
// accepted step when `record` is non-null. Returns the step size to try next.
double dopri_advance(const RhsFunction& rhs, double& t, Vector& x, Vector& dx, double t_end,
                     double h, const AdaptiveOptions& opts, std::size_t& steps,
                     std::vector<double>* rec_t, std::vector<Vector>* rec_x,
                     std::vector<Vector>* rec_dx) {
  constexpr double safety = 0.9;
  constexpr double min_factor = 0.2;
  constexpr double max_factor = 5.0;
  while (t < t_end) {
    const double remaining = t_end - t;
    const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    bool last = false;
    double h_try = std::min(h, opts.max_step);
    if (h_try >= remaining) {
      h_try = remaining;
      last = true;
    }
    if (h_try < h_min && !last) {
      std::ostringstream os;
      os << "step size underflow at t = " << t;
      throw StiffnessError(os.str(), t);
    }
    if (++steps > opts.max_steps) {
      std::ostringstream os;
      os << "maximum number of steps exceeded at t = " << t;
      throw StiffnessError(os.str(), t);
    }
    DopriStep st = dopri_step(rhs, t, x, dx, h_try, opts);
    if (st.err <= 1.0) {
      t = last ? t_end : t + h_try;
      x = std::move(st.x);
      dx = std::move(st.dx);
      if (rec_t != nullptr) {
        rec_t->push_back(t);
        rec_x->push_back(x);
        rec_dx->push_back(dx);
      }
      const double factor =
          st.err == 0.0 ? max_factor
                        : std::clamp(safety * std::pow(st.err, -0.2), min_factor, max_factor);
      // A step shortened to land on t_end says nothing about the next size.
      h = last ? std::max(h, h_try * factor) : h_try * factor;
    } else {
      h = h_try * std::max(min_factor, safety * std::pow(st.err, -0.2));
      if (h < h_min) {
        std::ostringstream os;
        os << "step size underflow at t = " << t;
        throw StiffnessError(os.str(), t);
      }
    }
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) {
    throw ValidationError("time grid needs at least 2 nodes");
  }
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    if (!(nodes_[i] < nodes_[i + 1]) || !std::isfinite(nodes_[i + 1]) || !std::isfinite(nodes_[i])) {
      throw ValidationError("time grid nodes must be finite and strictly increasing (index " +
                            std::to_string(i) + ")");
    }
  }
}

TimeGrid TimeGrid::uniform(double t0, double tf, std::size_t n_nodes) {
  if (n_nodes < 2) {
    throw ValidationError("uniform grid needs at least 2 nodes");
  }
  std::vector<double> nodes(n_nodes);
  const double h = (tf - t0) / static_cast<double>(n_nodes - 1);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    nodes[i] = t0 + h * static_cast<double>(i);
  }
  nodes.back() = tf;
  return TimeGrid(std::move(nodes));
}

std::size_t TimeGrid::interval_of(double t) const {
  if (!(t >= t0() && t <= tf())) {
    std::ostringstream os;
    os << "time " << t << " outside [" << t0() << ", " << tf() << "]";
    throw RangeError(os.str());
  }
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  const auto idx = static_cast<std::size_t>(it - nodes_.begin());
  return std::min(idx == 0 ? 0 : idx - 1, nodes_.size() - 2);
}

TimeGrid TimeGrid::reflected() const {
  const double a = t0();
  const double b = tf();
  std::vector<double> out(nodes_.size());
  const std::size_t n = nodes_.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a + b - nodes_[n - 1 - i];
  }
  out.front() = a;
  out.back() = b;
  return TimeGrid(std::move(out));
}

TimeGrid TimeGrid::refined() const {
  std::vector<double> out;
  out.reserve(2 * nodes_.size() - 1);
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    out.push_back(nodes_[i]);
    out.push_back(0.5 * (nodes_[i] + nodes_[i + 1]));
  }
  out.push_back(nodes_.back());
  return TimeGrid(std::move(out));
}

// ---------------------------------------------------------------------------
// Trajectory / MatrixSignal

Trajectory::Trajectory(TimeGrid g, std::vector<Vector> s, std::vector<Vector> d)
    : grid(std::move(g)), states(std::move(s)), derivs(std::move(d)) {
  if (states.size() != grid.size()) {
    throw DimensionError("trajectory has " + std::to_string(states.size()) + " states for " +
                         std::to_string(grid.size()) + " nodes");
  }
  const Eigen::Index n = states.front().size();
  for (const auto& x : states) {
    if (x.size() != n) {
      throw DimensionError("trajectory states have inconsistent dimension");
    }
  }
  if (!derivs.empty()) {
    if (derivs.size() != states.size()) {
      throw DimensionError("trajectory derivative count does not match state count");
    }
    for (const auto& d : derivs) {
      if (d.size() != n) {
        throw DimensionError("trajectory derivatives have inconsistent dimension");
      }
    }
  }
}

MatrixSignal::MatrixSignal(TimeGrid grid, std::vector<Matrix> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw DimensionError("matrix signal has " + std::to_string(values_.size()) +
                         " samples for " + std::to_string(grid_.size()) + " nodes");
  }
  for (const auto& m : values_) {
    if (m.rows() != values_.front().rows() || m.cols() != values_.front().cols()) {
      throw DimensionError("matrix signal samples have inconsistent shape");
    }
  }
}

MatrixSignal MatrixSignal::constant(TimeGrid grid, const Matrix& value) {
  std::vector<Matrix> values(grid.size(), value);
  return MatrixSignal(std::move(grid), std::move(values));
}

Matrix MatrixSignal::at(double t) const {
  const std::size_t i = grid_.interval_of(t);
  const double theta = (t - grid_[i]) / grid_.step(i);
  return (1.0 - theta) * values_[i] + theta * values_[i + 1];
}

// ---------------------------------------------------------------------------
// Integration

Trajectory integrate_ivp(const RhsFunction& rhs, const Vector& x0, const TimeGrid& grid) {
  const Eigen::Index n = x0.size();
  std::vector<Vector> xs;
  std::vector<Vector> dxs;
  xs.reserve(grid.size());
  dxs.reserve(grid.size());
  Vector x = x0;
  Vector k1 = checked_rhs(rhs, grid[0], x, n);
  xs.push_back(x);
  dxs.push_back(k1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i];
    const double h = grid.step(i);
    const Vector k2 = checked_rhs(rhs, t + 0.5 * h, x + 0.5 * h * k1, n);
    const Vector k3 = checked_rhs(rhs, t + 0.5 * h, x + 0.5 * h * k2, n);
    const Vector k4 = checked_rhs(rhs, t + h, x + h * k3, n);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    k1 = checked_rhs(rhs, grid[i + 1], x, n);
    xs.push_back(x);
    dxs.push_back(k1);
  }
  return Trajectory(grid, std::move(xs), std::move(dxs));
}

Trajectory integrate_ivp(const RhsFunction& rhs, const Vector& x0, double t0, double tf,
                         const AdaptiveOptions& opts) {
  if (!(t0 < tf)) {
    throw ValidationError("integration interval must satisfy t0 < tf");
  }
  double t = t0;
  Vector x = x0;
  Vector dx = checked_rhs(rhs, t, x, x0.size());
  std::vector<double> ts{t};
  std::vector<Vector> xs{x};
  std::vector<Vector> dxs{dx};
  std::size_t steps = 0;
  const double h = initial_step(rhs, t0, x0, dx, tf - t0, opts);
  dopri_advance(rhs, t, x, dx, tf, h, opts, steps, &ts, &xs, &dxs);
  return Trajectory(TimeGrid(std::move(ts)), std::move(xs), std::move(dxs));
}

Trajectory integrate_ivp(const RhsFunction& rhs, const Vector& x0, const TimeGrid& output,
                         const AdaptiveOptions& opts) {
  double t = output.t0();
  Vector x = x0;
  Vector dx = checked_rhs(rhs, t, x, x0.size());
  std::vector<Vector> xs{x};
  std::vector<Vector> dxs{dx};
  std::size_t steps = 0;
  double h = initial_step(rhs, t, x0, dx, output.tf() - output.t0(), opts);
  for (std::size_t i = 1; i < output.size(); ++i) {
    h = dopri_advance(rhs, t, x, dx, output[i], h, opts, steps, nullptr, nullptr, nullptr);
    xs.push_back(x);
    dxs.push_back(dx);
  }
  return Trajectory(output, std::move(xs), std::move(dxs));
}

// ---------------------------------------------------------------------------
// Linear solves

VectorSignal piecewise_linear(const TimeGrid& grid, std::vector<Vector> samples) {
  if (samples.size() != grid.size()) {
    throw DimensionError("sample count does not match grid size");
  }
  return [grid, samples = std::move(samples)](double t) -> Vector {
    const std::size_t i = grid.interval_of(t);
    if (t == grid[i]) {
      return samples[i];
    }
    if (t == grid[i + 1]) {
      return samples[i + 1];
    }
    const double theta = (t - grid[i]) / grid.step(i);
    return (1.0 - theta) * samples[i] + theta * samples[i + 1];
  };
}

VectorSignal constant_signal(Vector value) {
  return [value = std::move(value)](double) { return value; };
}

bool is_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) {
    return false;
  }
  if (m.size() == 0) {
    return true;
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

namespace detail {

Matrix rk4_linear_step(const Matrix& a0, const Matrix& am, const Matrix& a1, const Matrix& f0,
                       const Matrix& fm, const Matrix& f1, const Matrix& v, double h) {
  const Matrix k1 = a0 * v + f0;
  const Matrix k2 = am * (v + 0.5 * h * k1) + fm;
  const Matrix k3 = am * (v + 0.5 * h * k2) + fm;
  const Matrix k4 = a1 * (v + h * k3) + f1;
  return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

namespace {

Vector checked_forcing(const VectorSignal& forcing, double t, Eigen::Index n) {
  Vector f = forcing(t);
  if (f.size() != n) {
    throw DimensionError("forcing has dimension " + std::to_string(f.size()) + ", expected " +
                         std::to_string(n));
  }
  if (!f.allFinite()) {
    std::ostringstream os;
    os << "non-finite forcing at t = " << t;
    throw IntegrationError(os.str(), t);
  }
  return f;
}

}  // namespace

Trajectory solve_linear_forward(const MatrixSignal& a, const VectorSignal& forcing,
                                const Vector& v0) {
  if (a.rows() != a.cols()) {
    throw DimensionError("system matrix must be square");
  }
  if (a.rows() != v0.size()) {
    throw DimensionError("system matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " but initial vector has dimension " +
                         std::to_string(v0.size()));
  }
  const TimeGrid& grid = a.grid();
  const Eigen::Index n = v0.size();
  std::vector<Vector> vs;
  std::vector<Vector> dvs;
  vs.reserve(grid.size());
  dvs.reserve(grid.size());
  Vector v = v0;
  Vector f0 = checked_forcing(forcing, grid[0], n);
  vs.push_back(v);
  dvs.push_back(a[0] * v + f0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double h = grid.step(i);
    const Matrix am = 0.5 * (a[i] + a[i + 1]);
    const Vector fm = checked_forcing(forcing, grid[i] + 0.5 * h, n);
    const Vector f1 = checked_forcing(forcing, grid[i + 1], n);
    v = detail::rk4_linear_step(a[i], am, a[i + 1], f0, fm, f1, v, h);
    vs.push_back(v);
    dvs.push_back(a[i + 1] * v + f1);
    f0 = f1;
  }
  return Trajectory(grid, std::move(vs), std::move(dvs));
}

Trajectory solve_linear_backward(const MatrixSignal& a, const VectorSignal& forcing,
                                 const Vector& vf) {
  if (a.rows() != a.cols()) {
    throw DimensionError("system matrix must be square");
  }
  if (a.rows() != vf.size()) {
    throw DimensionError("system matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " but terminal vector has dimension " +
                         std::to_string(vf.size()));
  }
  const TimeGrid& grid = a.grid();
  const std::size_t n = grid.size();
  const double shift = grid.t0() + grid.tf();
  std::vector<Matrix> at(n);
  for (std::size_t i = 0; i < n; ++i) {
    at[i] = a[n - 1 - i].transpose();
  }
  const MatrixSignal reflected(grid.reflected(), std::move(at));
  const VectorSignal reflected_forcing = [&forcing, shift](double s) { return forcing(shift - s); };
  Trajectory mu = solve_linear_forward(reflected, reflected_forcing, vf);
  std::vector<Vector> ls(n);
  std::vector<Vector> dls(n);
  for (std::size_t i = 0; i < n; ++i) {
    ls[i] = std::move(mu.states[n - 1 - i]);
    dls[i] = -mu.derivs[n - 1 - i];
  }
  return Trajectory(grid, std::move(ls), std::move(dls));
}

// ---------------------------------------------------------------------------
// Quadrature and dense output

double quadrature(const TimeGrid& grid, std::span<const double> samples) {
  if (samples.size() != grid.size()) {
    throw DimensionError("quadrature: " + std::to_string(samples.size()) + " samples for " +
                         std::to_string(grid.size()) + " nodes");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    acc += 0.5 * grid.step(i) * (samples[i] + samples[i + 1]);
  }
  return acc;
}

std::vector<double> cumulative_quadrature(const TimeGrid& grid, std::span<const double> samples) {
  if (samples.size() != grid.size()) {
    throw DimensionError("cumulative quadrature: sample count does not match grid size");
  }
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    out[i + 1] = out[i] + 0.5 * grid.step(i) * (samples[i] + samples[i + 1]);
  }
  return out;
}

Vector interpolate(const Trajectory& traj, double t) {
  const std::size_t i = traj.grid.interval_of(t);
  if (t == traj.grid[i]) {
    return traj.states[i];
  }
  if (t == traj.grid[i + 1]) {
    return traj.states[i + 1];
  }
  const double h = traj.grid.step(i);
  const double s = (t - traj.grid[i]) / h;
  if (!traj.has_derivs()) {
    return (1.0 - s) * traj.states[i] + s * traj.states[i + 1];
  }
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
  const double h10 = s3 - 2.0 * s2 + s;
  const double h01 = -2.0 * s3 + 3.0 * s2;
  const double h11 = s3 - s2;
  return h00 * traj.states[i] + (h10 * h) * traj.derivs[i] + h01 * traj.states[i + 1] +
         (h11 * h) * traj.derivs[i + 1];
}

Trajectory resample(const Trajectory& traj, const TimeGrid& grid) {
  std::vector<Vector> xs;
  std::vector<Vector> dxs;
  xs.reserve(grid.size());
  for (double t : grid.nodes()) {
    xs.push_back(interpolate(traj, t));
  }
  if (traj.has_derivs()) {
    // Derivative of the Hermite interpolant.
    dxs.reserve(grid.size());
    for (double t : grid.nodes()) {
      const std::size_t i = traj.grid.interval_of(t);
      const double h = traj.grid.step(i);
      const double s = (t - traj.grid[i]) / h;
      const double d00 = (6.0 * s * s - 6.0 * s) / h;
      const double d10 = 3.0 * s * s - 4.0 * s + 1.0;
      const double d01 = (-6.0 * s * s + 6.0 * s) / h;
      const double d11 = 3.0 * s * s - 2.0 * s;
      dxs.push_back(d00 * traj.states[i] + d10 * traj.derivs[i] + d01 * traj.states[i + 1] +
                    d11 * traj.derivs[i + 1]);
    }
  }
  return Trajectory(grid, std::move(xs), std::move(dxs));
}

}  // namespace odesens
