/**
 * @file sensitivity.hpp
 * @brief Forward sensitivities and adjoints of trajectories and quantities of
 *        interest with respect to the component function g.
 */
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "odesens/model.hpp"
#include "odesens/ode.hpp"

namespace odesens {

struct SensitivityResult {
  Trajectory delta_x;            // delta_x(t0) == 0
  std::string source_direction;  // free-form description of the delta_g used
};

struct AdjointResult {
  Trajectory lambda;  // lambda(tf) == grad phi(x(tf))
};

/// delta_x' = A delta_x + B delta_g, delta_x(t0) = 0, where delta_g is sampled
/// along the nominal trajectory on lin's grid.
SensitivityResult solve_sensitivity(const LinearizedSystem& lin, const std::vector<Vector>& dg_along,
                                    std::string source_direction = {});

/// phi(x(tf)) + trapezoid integral of l(t, x, g(t, x)).
double evaluate_qoi(const QoiModel& q, const Trajectory& traj, const ComponentModel& g);

/// -lambda' = A^T lambda + grad_x l + g_x^T grad_g l, lambda(tf) = grad phi(x(tf)).
AdjointResult solve_adjoint(const LinearizedSystem& lin, const QoiModel& q, const Trajectory& traj,
                            const ComponentModel& g);

/// Per-node weight w = B^T lambda + grad_g l.
std::vector<Vector> qoi_weight(const AdjointResult& adj, const LinearizedSystem& lin,
                               const QoiModel& q, const Trajectory& traj, const ComponentModel& g);

/// Trapezoid integral of w^T delta_g.
double qoi_directional_derivative(const AdjointResult& adj, const LinearizedSystem& lin,
                                  const QoiModel& q, const Trajectory& traj,
                                  const ComponentModel& g, const std::vector<Vector>& dg_along);

/// The same directional derivative computed from a forward sensitivity instead
/// of the adjoint: grad phi^T dx(tf) + integral of (l_x + g_x^T l_g)^T dx + l_g^T dg.
double qoi_derivative_forward(const SensitivityResult& sens, const QoiModel& q,
                              const Trajectory& traj, const ComponentModel& g,
                              const std::vector<Vector>& dg_along);

/// sqrt of the trapezoid integral of delta^T Q delta.
double state_error_norm(const Trajectory& delta, const MatrixSignal& q);

/// Same with Q = I.
double state_error_norm(const Trajectory& delta);

/// Pointwise difference a - b on a common grid.
Trajectory difference(const Trajectory& a, const Trajectory& b);

struct Residual {
  double equation = 0.0;  // sup over nodes of |x'(t_i) - f(t_i, x_i, g(t_i, x_i))|
  double initial = 0.0;   // |x(t0) - x0|
};

Residual residual_psi(const Trajectory& traj, const DynamicsModel& f, const ComponentModel& g,
                      const Vector& x0);

}  // namespace odesens
