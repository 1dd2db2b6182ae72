/**
 * @file model.hpp
 * @brief Dynamics f(t,x,g), component function g(t,x), quantity of interest
 *        and error envelope, together with linearization and derivative checks.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odesens/ode.hpp"

namespace odesens {

/// State- and time-dependent component function g(t, x) with its Jacobian and,
/// optionally, its second derivatives (one n_x-by-n_x Hessian per output).
struct ComponentModel {
  using Value = std::function<Vector(double, const Vector&)>;
  using Jacobian = std::function<Matrix(double, const Vector&)>;
  using Hessian = std::function<std::vector<Matrix>(double, const Vector&)>;

  Eigen::Index n_x = 0;
  Eigen::Index n_g = 0;
  Value value;
  Jacobian jacobian;
  Hessian hessian;  // may be empty

  [[nodiscard]] bool has_hessian() const { return static_cast<bool>(hessian); }
};

/// Right-hand side f(t, x, g) and its partial Jacobians.
struct DynamicsModel {
  using Rhs = std::function<Vector(double, const Vector&, const Vector&)>;
  using Jacobian = std::function<Matrix(double, const Vector&, const Vector&)>;

  Eigen::Index n_x = 0;
  Eigen::Index n_g = 0;
  Rhs rhs;
  Jacobian jac_x;  // n_x by n_x
  Jacobian jac_g;  // n_x by n_g
};

/// q(x, g) = phi(x(tf)) + integral of l(t, x(t), g(t, x(t))) dt.
/// Leaving `running` empty means l is identically zero.
struct QoiModel {
  std::function<double(const Vector&)> terminal;
  std::function<Vector(const Vector&)> terminal_grad;
  std::function<double(double, const Vector&, const Vector&)> running;
  std::function<Vector(double, const Vector&, const Vector&)> running_grad_x;
  std::function<Vector(double, const Vector&, const Vector&)> running_grad_g;

  [[nodiscard]] bool has_running() const { return static_cast<bool>(running); }
};

/// Componentwise bound |g_eps(t,x) - g_star(t,x)| <= eps(t,x).
struct ErrorEnvelope {
  Eigen::Index n_g = 0;
  std::function<Vector(double, const Vector&)> bound;
};

/// A(t) = f_x + f_g g_x and B(t) = f_g sampled along a trajectory.
struct LinearizedSystem {
  MatrixSignal a;
  MatrixSignal b;

  [[nodiscard]] const TimeGrid& grid() const { return a.grid(); }
  [[nodiscard]] Eigen::Index n_x() const { return a.rows(); }
  [[nodiscard]] Eigen::Index n_g() const { return b.cols(); }
};

/// f(t, x, g(t, x)).
Vector eval_rhs(const DynamicsModel& f, const ComponentModel& g, double t, const Vector& x);

/// The closed-loop right-hand side x -> f(t, x, g(t, x)) as an integrator callback.
RhsFunction closed_loop(const DynamicsModel& f, const ComponentModel& g);

LinearizedSystem linearize(const DynamicsModel& f, const ComponentModel& g, const Trajectory& traj);

/// A(t, x) at a single point.
Matrix closed_loop_jacobian(const DynamicsModel& f, const ComponentModel& g, double t,
                            const Vector& x);

struct ProbePoint {
  double t = 0.0;
  Vector x;
  Vector g;  // ignored for component models
};

/// Worst relative mismatch per partial between central differences and the
/// declared analytic derivative. Denominators are floored at 1.
struct DerivativeReport {
  std::map<std::string, double> worst;

  [[nodiscard]] double max() const;
};

inline constexpr double kDefaultFdStep = 1e-6;

DerivativeReport check_derivatives(const DynamicsModel& f, const std::vector<ProbePoint>& probes,
                                   double h = kDefaultFdStep);
DerivativeReport check_derivatives(const ComponentModel& g, const std::vector<ProbePoint>& probes,
                                   double h = kDefaultFdStep);
DerivativeReport check_derivatives(const QoiModel& q, const std::vector<ProbePoint>& probes,
                                   double h = kDefaultFdStep);

struct DeviationReport {
  std::vector<Vector> delta;                // g_eps - g_star per node
  std::vector<Vector> envelope;             // empty when no envelope was given
  std::vector<std::size_t> violations;      // nodes where |delta| > envelope somewhere
};

DeviationReport model_deviation(const ComponentModel& g_eps, const ComponentModel& g_star,
                                const Trajectory& traj,
                                const std::optional<ErrorEnvelope>& envelope = std::nullopt);

/// Samples an envelope along a trajectory; throws ValidationError on negative entries.
std::vector<Vector> sample_envelope(const ErrorEnvelope& env, const Trajectory& traj);

/// Tensor-product sample set over [t_lo, t_hi] x box.
struct SampleBox {
  double t_lo = 0.0;
  double t_hi = 0.0;
  Vector x_lo;
  Vector x_hi;
  std::size_t t_count = 1;
  std::size_t x_count = 11;  // per state dimension
};

/// Sampled estimate of sum_{n<=k} sup |g^(n)|: a lower bound on the true norm.
/// Vectors use the Euclidean norm, derivative arrays the Frobenius norm.
double gnorm_sampled(const ComponentModel& g, int k, const SampleBox& box);

}  // namespace odesens
