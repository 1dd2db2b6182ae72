/**
 * @file ode.hpp
 * @brief Time grids, trajectories, explicit Runge-Kutta integration and
 *        linear forward/backward solves.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace odesens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Strictly increasing sequence of time nodes covering [t0, tf].
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> nodes);

  /// `n_nodes` equally spaced nodes; the last node is exactly `tf`.
  static TimeGrid uniform(double t0, double tf, std::size_t n_nodes);

  [[nodiscard]] double t0() const noexcept { return nodes_.front(); }
  [[nodiscard]] double tf() const noexcept { return nodes_.back(); }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::size_t intervals() const noexcept { return nodes_.size() - 1; }
  [[nodiscard]] double operator[](std::size_t i) const { return nodes_[i]; }
  [[nodiscard]] double step(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
  [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }

  /// Index i of the interval [t_i, t_{i+1}] containing t; tf maps to the last interval.
  /// Throws RangeError outside [t0, tf].
  [[nodiscard]] std::size_t interval_of(double t) const;

  /// Grid under t -> t0 + tf - t, re-sorted increasing.
  [[nodiscard]] TimeGrid reflected() const;

  /// Grid with every interval bisected.
  [[nodiscard]] TimeGrid refined() const;

  bool operator==(const TimeGrid& other) const = default;

 private:
  std::vector<double> nodes_;
};

/// Sampled solution of an ODE. `derivs` holds the right-hand side at each node
/// (used for cubic Hermite dense output) and may be empty.
struct Trajectory {
  Trajectory(TimeGrid grid, std::vector<Vector> states, std::vector<Vector> derivs = {});

  TimeGrid grid;
  std::vector<Vector> states;
  std::vector<Vector> derivs;

  [[nodiscard]] std::size_t dim() const { return states.front().size(); }
  [[nodiscard]] std::size_t size() const { return states.size(); }
  [[nodiscard]] bool has_derivs() const { return !derivs.empty(); }
  [[nodiscard]] const Vector& initial() const { return states.front(); }
  [[nodiscard]] const Vector& terminal() const { return states.back(); }
};

/// Matrix-valued signal sampled on a grid; piecewise linear between nodes.
class MatrixSignal {
 public:
  MatrixSignal(TimeGrid grid, std::vector<Matrix> values);

  /// Same matrix at every node of `grid`.
  static MatrixSignal constant(TimeGrid grid, const Matrix& value);

  [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] Eigen::Index rows() const noexcept { return values_.front().rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values_.front().cols(); }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] const Matrix& operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] const std::vector<Matrix>& values() const noexcept { return values_; }

  /// Linear interpolation between the bracketing nodes.
  [[nodiscard]] Matrix at(double t) const;

 private:
  TimeGrid grid_;
  std::vector<Matrix> values_;
};

using RhsFunction = std::function<Vector(double, const Vector&)>;
using VectorSignal = std::function<Vector(double)>;

struct AdaptiveOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 selects a step automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 10'000'000;
};

/// Classical RK4, one step per grid interval.
Trajectory integrate_ivp(const RhsFunction& rhs, const Vector& x0, const TimeGrid& grid);

/// Dormand-Prince 5(4); the returned grid is the sequence of accepted steps.
Trajectory integrate_ivp(const RhsFunction& rhs, const Vector& x0, double t0, double tf,
                         const AdaptiveOptions& opts);

/// Dormand-Prince 5(4) with steps clipped so that every node of `output` is hit exactly.
Trajectory integrate_ivp(const RhsFunction& rhs, const Vector& x0, const TimeGrid& output,
                         const AdaptiveOptions& opts);

/// Piecewise-linear interpolant of per-node samples.
VectorSignal piecewise_linear(const TimeGrid& grid, std::vector<Vector> samples);

VectorSignal constant_signal(Vector value);

/// v' = A(t) v + forcing(t), v(t0) = v0, one RK4 step per interval of A's grid.
Trajectory solve_linear_forward(const MatrixSignal& a, const VectorSignal& forcing, const Vector& v0);

/// -l' = A(t)^T l + forcing(t), l(tf) = vf; a forward solve in reflected time.
Trajectory solve_linear_backward(const MatrixSignal& a, const VectorSignal& forcing, const Vector& vf);

/// Composite trapezoid rule.
double quadrature(const TimeGrid& grid, std::span<const double> samples);

/// Cumulative trapezoid integral, starting at 0 at t0.
std::vector<double> cumulative_quadrature(const TimeGrid& grid, std::span<const double> samples);

/// Cubic Hermite dense output (linear when the trajectory carries no derivatives).
Vector interpolate(const Trajectory& traj, double t);

/// Resamples a trajectory onto another grid inside its time span.
Trajectory resample(const Trajectory& traj, const TimeGrid& grid);

/// Symmetric up to 1e-12 relative to the largest entry.
bool is_symmetric(const Matrix& m);

namespace detail {

/// One RK4 step of V' = A(t) V + F(t) where A and F are given at the left end,
/// midpoint and right end of the step. V and F may carry several columns.
Matrix rk4_linear_step(const Matrix& a0, const Matrix& am, const Matrix& a1, const Matrix& f0,
                       const Matrix& fm, const Matrix& f1, const Matrix& v, double h);

}  // namespace detail

}  // namespace odesens
