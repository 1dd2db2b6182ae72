#include "odesens/worst_case.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "odesens/errors.hpp"

namespace odesens {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw DimensionError(what);
  }
}

// Trapezoid weights of a grid.
std::vector<double> trapezoid_weights(const TimeGrid& grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    w[i] += 0.5 * grid.step(i);
    w[i + 1] += 0.5 * grid.step(i);
  }
  return w;
}

void check_envelope(const TimeGrid& grid, const std::vector<Vector>& eps, Eigen::Index n_g) {
  require(eps.size() == grid.size(), "envelope samples do not match the grid");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    require(eps[i].size() == n_g, "envelope sample has wrong dimension");
    if ((eps[i].array() < 0.0).any() || !eps[i].allFinite()) {
      std::ostringstream os;
      os << "envelope is negative or non-finite at t = " << grid[i];
      throw ValidationError(os.str());
    }
  }
}

double sign_or(double v, double fallback) {
  if (v > 0.0) {
    return 1.0;
  }
  if (v < 0.0) {
    return -1.0;
  }
  return fallback;
}

// Polishes `d` to a vertex that is a fixed point of d = b sign(H d) and admits
// no improving single-coordinate flip. Returns the number of H applications.
std::size_t polish_vertex(const CondensedBoxQP& qp, const Vector& diag, Vector& d, double tol,
                          std::size_t max_rounds) {
  const Vector& b = qp.bounds();
  std::size_t applications = 0;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    Vector grad = qp.apply_h(d);
    ++applications;
    bool changed = false;
    for (Eigen::Index j = 0; j < d.size(); ++j) {
      const double target = b[j] * sign_or(grad[j], sign_or(d[j], 1.0));
      if (target != d[j]) {
        d[j] = target;
        changed = true;
      }
    }
    if (changed) {
      continue;
    }
    // Flip gain: f(d - 2 d_j e_j) - f(d) = -2 d_j g_j + 2 d_j^2 H_jj.
    const double f = 0.5 * d.dot(grad);
    double best_gain = tol * std::max(1.0, std::abs(f));
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < d.size(); ++j) {
      const double gain = -2.0 * d[j] * grad[j] + 2.0 * d[j] * d[j] * diag[j];
      if (gain > best_gain) {
        best_gain = gain;
        best = j;
      }
    }
    if (best < 0) {
      break;
    }
    d[best] = -d[best];
  }
  return applications;
}

}  // namespace

// ---------------------------------------------------------------------------
// CondensedBoxQP

CondensedBoxQP::CondensedBoxQP(TimeGrid grid, std::vector<Matrix> transitions,
                               std::vector<Matrix> inputs, std::vector<Matrix> weights,
                               std::vector<Vector> bounds)
    : grid_(std::move(grid)),
      transitions_(std::move(transitions)),
      inputs_(std::move(inputs)),
      weights_(std::move(weights)) {
  const std::size_t n = grid_.intervals();
  require(transitions_.size() == n && inputs_.size() == n && bounds.size() == n,
          "condensed QP: one transition, input and bound per interval required");
  require(weights_.size() == grid_.size(), "condensed QP: one weight per node required");
  n_x_ = transitions_.front().rows();
  n_g_ = inputs_.front().cols();
  bounds_.resize(static_cast<Eigen::Index>(n) * n_g_);
  for (std::size_t j = 0; j < n; ++j) {
    require(transitions_[j].rows() == n_x_ && transitions_[j].cols() == n_x_,
            "condensed QP: transition has wrong shape");
    require(inputs_[j].rows() == n_x_ && inputs_[j].cols() == n_g_,
            "condensed QP: input matrix has wrong shape");
    require(bounds[j].size() == n_g_, "condensed QP: bound has wrong dimension");
    if ((bounds[j].array() < 0.0).any()) {
      throw ValidationError("condensed QP: bounds must be nonnegative");
    }
    bounds_.segment(static_cast<Eigen::Index>(j) * n_g_, n_g_) = bounds[j];
  }
  for (const auto& w : weights_) {
    require(w.rows() == n_x_ && w.cols() == n_x_, "condensed QP: weight has wrong shape");
  }
}

Vector CondensedBoxQP::apply_s(const Vector& controls) const {
  require(controls.size() == dim(), "condensed QP: control vector has wrong length");
  const std::size_t n = intervals();
  Vector out(static_cast<Eigen::Index>(n + 1) * n_x_);
  Vector x = Vector::Zero(n_x_);
  out.head(n_x_) = x;
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    x = transitions_[j] * x + inputs_[j] * controls.segment(jj * n_g_, n_g_);
    out.segment((jj + 1) * n_x_, n_x_) = x;
  }
  return out;
}

Vector CondensedBoxQP::apply_st(const Vector& states) const {
  const std::size_t n = intervals();
  require(states.size() == static_cast<Eigen::Index>(n + 1) * n_x_,
          "condensed QP: state vector has wrong length");
  Vector out(dim());
  Vector p = states.segment(static_cast<Eigen::Index>(n) * n_x_, n_x_);
  for (std::size_t j = n; j-- > 0;) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.segment(jj * n_g_, n_g_) = inputs_[j].transpose() * p;
    p = states.segment(jj * n_x_, n_x_) + transitions_[j].transpose() * p;
  }
  return out;
}

Vector CondensedBoxQP::apply_h(const Vector& controls) const {
  Vector y = apply_s(controls);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    y.segment(ii * n_x_, n_x_) = weights_[i] * y.segment(ii * n_x_, n_x_);
  }
  return apply_st(y);
}

double CondensedBoxQP::objective(const Vector& controls) const {
  const Vector y = apply_s(controls);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const auto seg = y.segment(static_cast<Eigen::Index>(i) * n_x_, n_x_);
    acc += seg.dot(weights_[i] * seg);
  }
  return 0.5 * acc;
}

Vector CondensedBoxQP::hessian_diagonal() const {
  const std::size_t n = intervals();
  Vector diag = Vector::Zero(dim());
  for (std::size_t j = 0; j < n; ++j) {
    // Response of every later node to a unit impulse in each component of d_j.
    Matrix x = inputs_[j];
    for (std::size_t i = j + 1; i <= n; ++i) {
      if (i > j + 1) {
        x = transitions_[i - 1] * x;
      }
      const Matrix wx = weights_[i] * x;
      for (Eigen::Index c = 0; c < n_g_; ++c) {
        diag[static_cast<Eigen::Index>(j) * n_g_ + c] += x.col(c).dot(wx.col(c));
      }
    }
  }
  return diag;
}

Matrix CondensedBoxQP::dense_hessian() const {
  Matrix h(dim(), dim());
  for (Eigen::Index j = 0; j < dim(); ++j) {
    h.col(j) = apply_h(Vector::Unit(dim(), j));
  }
  return 0.5 * (h + h.transpose());
}

Trajectory CondensedBoxQP::states(const Vector& controls) const {
  const Vector y = apply_s(controls);
  std::vector<Vector> xs(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    xs[i] = y.segment(static_cast<Eigen::Index>(i) * n_x_, n_x_);
  }
  return Trajectory(grid_, std::move(xs));
}

// ---------------------------------------------------------------------------
// Construction

CondensedBoxQP build_state_bound_qp(const LinearizedSystem& lin, const std::vector<Vector>& eps_along,
                                    const MatrixSignal& q) {
  const TimeGrid& grid = lin.grid();
  require(lin.b.grid() == grid, "linearization matrices live on different grids");
  require(q.grid() == grid, "weight signal lives on a different grid");
  check_envelope(grid, eps_along, lin.n_g());
  const Eigen::Index nx = lin.n_x();
  const Eigen::Index ng = lin.n_g();
  const std::size_t n = grid.intervals();
  const std::vector<double> tw = trapezoid_weights(grid);

  std::vector<Matrix> weights(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Matrix& qi = q[i];
    require(qi.rows() == nx && qi.cols() == nx, "weight matrix has wrong shape");
    if (!is_symmetric(qi)) {
      throw ValidationError("weight matrix is not symmetric");
    }
    weights[i] = tw[i] * qi;
  }

  std::vector<Matrix> transitions(n);
  std::vector<Matrix> inputs(n);
  std::vector<Vector> bounds(n);
  const Matrix eye = Matrix::Identity(nx, nx);
  const Matrix zero_x = Matrix::Zero(nx, nx);
  const Matrix zero_g = Matrix::Zero(nx, ng);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = grid.step(j);
    const Matrix am = 0.5 * (lin.a[j] + lin.a[j + 1]);
    const Matrix bm = 0.5 * (lin.b[j] + lin.b[j + 1]);
    transitions[j] =
        detail::rk4_linear_step(lin.a[j], am, lin.a[j + 1], zero_x, zero_x, zero_x, eye, h);
    inputs[j] = detail::rk4_linear_step(lin.a[j], am, lin.a[j + 1], lin.b[j], bm, lin.b[j + 1],
                                        zero_g, h);
    bounds[j] = eps_along[j];
  }
  return CondensedBoxQP(grid, std::move(transitions), std::move(inputs), std::move(weights),
                        std::move(bounds));
}

CondensedBoxQP build_state_bound_qp(const LinearizedSystem& lin,
                                    const std::vector<Vector>& eps_along) {
  return build_state_bound_qp(
      lin, eps_along, MatrixSignal::constant(lin.grid(), Matrix::Identity(lin.n_x(), lin.n_x())));
}

// ---------------------------------------------------------------------------
// Solvers

BoxQpResult maximize_box_qp(const CondensedBoxQP& qp, const BoxQpOptions& opts) {
  const Eigen::Index n = qp.dim();
  const Vector& b = qp.bounds();
  BoxQpResult best;
  best.controls = b;
  best.value = n == 0 ? 0.0 : qp.objective(b);
  if (n == 0 || b.maxCoeff() == 0.0) {
    best.value = 0.0;
    best.starts = 1;
    best.objective_history = {0.0};
    return best;
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Power iteration on the box-scaled operator for the step size and the
  // leading-eigenvector start.
  Vector v(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    v[j] = unit(rng) * b[j];
  }
  double lambda = 0.0;
  std::size_t applications = 0;
  for (int it = 0; it < 100; ++it) {
    const double nv = v.norm();
    if (nv == 0.0) {
      break;
    }
    v /= nv;
    Vector hv = qp.apply_h(v);
    ++applications;
    const double next = v.dot(hv);
    v = std::move(hv);
    if (it > 10 && std::abs(next - lambda) <= 1e-6 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Power iteration underestimates ||H||; a safety factor keeps the ascent step stable.
  const double step = lambda > 0.0 ? 1.0 / (1.5 * lambda) : 0.0;
  const Vector diag = qp.hessian_diagonal();

  std::vector<Vector> starts;
  {
    Vector s(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      s[j] = b[j] * sign_or(v[j], 1.0);
    }
    starts.push_back(std::move(s));
  }
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    Vector s(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      s[j] = b[j] * (unit(rng) >= 0.0 ? 1.0 : -1.0);
    }
    starts.push_back(std::move(s));
  }

  best.value = -std::numeric_limits<double>::infinity();
  best.converged = true;
  for (Vector d : starts) {
    if (step > 0.0) {
      bool stationary = false;
      // The objective is convex, so a projected step of any length cannot
      // decrease it; growing the step stops weakly curved coordinates from
      // crawling toward their bound.
      double t = step;
      for (std::size_t it = 0; it < opts.max_iters; ++it) {
        const Vector grad = qp.apply_h(d);
        ++applications;
        const Vector next = (d + t * grad).cwiseMax(-b).cwiseMin(b);
        t = std::min(2.0 * t, 1e300);
        const double moved = (next - d).lpNorm<Eigen::Infinity>();
        d = next;
        if (moved <= opts.tol * b.maxCoeff()) {
          stationary = true;
          break;
        }
      }
      if (!stationary) {
        best.converged = false;
      }
    }
    applications += polish_vertex(qp, diag, d, opts.tol, 10 * static_cast<std::size_t>(n) + 10);
    const double value = qp.objective(d);
    if (value > best.value) {
      best.value = value;
      best.controls = d;
    }
    best.objective_history.push_back(best.value);
    ++best.starts;
  }
  best.iterations = applications;
  return best;
}

BoxQpResult enumerate_box_qp(const CondensedBoxQP& qp) {
  const Eigen::Index n = qp.dim();
  if (n > 30) {
    throw ValidationError("enumerate_box_qp: dimension too large for exhaustive enumeration");
  }
  const Vector& b = qp.bounds();
  BoxQpResult best;
  best.value = -std::numeric_limits<double>::infinity();
  const std::uint64_t count = std::uint64_t{1} << n;
  Vector d(n);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (Eigen::Index j = 0; j < n; ++j) {
      d[j] = ((mask >> j) & 1U) != 0U ? -b[j] : b[j];
    }
    const double value = qp.objective(d);
    if (value > best.value) {
      best.value = value;
      best.controls = d;
    }
  }
  best.starts = static_cast<std::size_t>(count);
  return best;
}

// ---------------------------------------------------------------------------
// Bounds

namespace {

std::vector<Vector> per_node_certificate(const CondensedBoxQP& qp, const Vector& controls) {
  const std::size_t n = qp.intervals();
  std::vector<Vector> cert(n + 1);
  for (std::size_t j = 0; j < n; ++j) {
    cert[j] = controls.segment(static_cast<Eigen::Index>(j) * qp.n_g(), qp.n_g());
  }
  cert[n] = cert[n - 1];
  return cert;
}

LinearizedSystem bisect(const LinearizedSystem& lin) {
  const TimeGrid fine = lin.grid().refined();
  std::vector<Matrix> as;
  std::vector<Matrix> bs;
  as.reserve(fine.size());
  bs.reserve(fine.size());
  for (double t : fine.nodes()) {
    as.push_back(lin.a.at(t));
    bs.push_back(lin.b.at(t));
  }
  return {MatrixSignal(fine, std::move(as)), MatrixSignal(fine, std::move(bs))};
}

std::vector<Vector> bisect(const std::vector<Vector>& samples) {
  std::vector<Vector> out;
  out.reserve(2 * samples.size() - 1);
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    out.push_back(samples[i]);
    out.push_back(0.5 * (samples[i] + samples[i + 1]));
  }
  out.push_back(samples.back());
  return out;
}

MatrixSignal bisect(const MatrixSignal& q) {
  const TimeGrid fine = q.grid().refined();
  std::vector<Matrix> qs;
  qs.reserve(fine.size());
  for (double t : fine.nodes()) {
    qs.push_back(q.at(t));
  }
  return MatrixSignal(fine, std::move(qs));
}

}  // namespace

BoundReport state_error_bound(const LinearizedSystem& lin, const std::vector<Vector>& eps_along,
                              const MatrixSignal& q, const StateBoundOptions& opts) {
  const CondensedBoxQP qp = build_state_bound_qp(lin, eps_along, q);
  const BoxQpResult res = maximize_box_qp(qp, opts.qp);
  BoundReport rep;
  rep.kind = BoundKind::StateL2Q;
  rep.value = std::sqrt(std::max(0.0, 2.0 * res.value));
  rep.certificate = per_node_certificate(qp, res.controls);
  rep.delta_x = qp.states(res.controls);
  rep.diagnostics.starts = res.starts;
  rep.diagnostics.iterations = res.iterations;
  rep.diagnostics.converged = res.converged;
  rep.diagnostics.objective_history = res.objective_history;
  if (opts.refinement_check) {
    const CondensedBoxQP fine = build_state_bound_qp(bisect(lin), bisect(eps_along), bisect(q));
    const BoxQpResult fres = maximize_box_qp(fine, opts.qp);
    const double fine_value = std::sqrt(std::max(0.0, 2.0 * fres.value));
    rep.diagnostics.refined_value = fine_value;
    rep.diagnostics.refinement_delta =
        std::abs(fine_value - rep.value) / std::max(rep.value, std::numeric_limits<double>::min());
  }
  return rep;
}

BoundReport state_error_bound(const LinearizedSystem& lin, const std::vector<Vector>& eps_along,
                              const StateBoundOptions& opts) {
  return state_error_bound(
      lin, eps_along, MatrixSignal::constant(lin.grid(), Matrix::Identity(lin.n_x(), lin.n_x())),
      opts);
}

BoundReport qoi_bound_from_weight(const TimeGrid& grid, const std::vector<Vector>& weight,
                                  const std::vector<Vector>& eps_along) {
  require(weight.size() == grid.size(), "QoI weight samples do not match the grid");
  const Eigen::Index ng = weight.front().size();
  check_envelope(grid, eps_along, ng);
  BoundReport rep;
  rep.kind = BoundKind::Qoi;
  std::vector<double> samples(grid.size());
  rep.certificate.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(weight[i].size() == ng, "QoI weight sample has wrong dimension");
    samples[i] = weight[i].cwiseAbs().dot(eps_along[i]);
    Vector d(ng);
    for (Eigen::Index c = 0; c < ng; ++c) {
      d[c] = eps_along[i][c] * sign_or(weight[i][c], 1.0);
    }
    rep.certificate.push_back(std::move(d));
  }
  rep.value = quadrature(grid, samples);
  rep.diagnostics.starts = 0;
  return rep;
}

BoundReport qoi_error_bound(const AdjointResult& adj, const LinearizedSystem& lin, const QoiModel& q,
                            const Trajectory& traj, const ComponentModel& g,
                            const std::vector<Vector>& eps_along) {
  return qoi_bound_from_weight(traj.grid, qoi_weight(adj, lin, q, traj, g), eps_along);
}

}  // namespace odesens
