/**
 * @file worst_case.hpp
 * @brief Sensitivity-based worst-case bounds.
 *
 * The state bound maximizes 1/2 int dx^T Q dx over linear dynamics
 * dx' = A dx + B delta, dx(t0) = 0, subject to |delta| <= eps componentwise.
 * Controls are piecewise constant on grid intervals and the dynamics are
 * condensed into a linear map S from stacked controls to stacked node states,
 * so the problem becomes max 1/2 delta^T H delta over a box with
 * H = S^T Qhat S. That is a convex maximization and only local optima are
 * certified.
 *
 * The QoI bound is the closed-form optimum of the linear program
 * max |int w^T delta| over the same box, w = B^T lambda + grad_g l.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "odesens/model.hpp"
#include "odesens/ode.hpp"
#include "odesens/sensitivity.hpp"

namespace odesens {

class CondensedBoxQP {
 public:
  /// `transitions[j]`, `inputs[j]`: the one-step map x_{j+1} = transitions[j] x_j + inputs[j] d_j.
  /// `weights[i]`: quadrature-weighted Q at node i. `bounds[j]`: box half-widths of d_j.
  CondensedBoxQP(TimeGrid grid, std::vector<Matrix> transitions, std::vector<Matrix> inputs,
                 std::vector<Matrix> weights, std::vector<Vector> bounds);

  [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] Eigen::Index n_x() const noexcept { return n_x_; }
  [[nodiscard]] Eigen::Index n_g() const noexcept { return n_g_; }
  [[nodiscard]] std::size_t intervals() const noexcept { return inputs_.size(); }
  [[nodiscard]] Eigen::Index dim() const noexcept {
    return static_cast<Eigen::Index>(intervals()) * n_g_;
  }
  /// Stacked box half-widths, length dim().
  [[nodiscard]] const Vector& bounds() const noexcept { return bounds_; }

  /// Stacked node states (length (N+1) n_x) driven by stacked controls.
  [[nodiscard]] Vector apply_s(const Vector& controls) const;
  /// Transpose of apply_s.
  [[nodiscard]] Vector apply_st(const Vector& states) const;
  /// H controls = S^T Qhat S controls.
  [[nodiscard]] Vector apply_h(const Vector& controls) const;
  /// 1/2 controls^T H controls.
  [[nodiscard]] double objective(const Vector& controls) const;

  [[nodiscard]] Vector hessian_diagonal() const;
  /// Materializes H. Intended for small instances and tests.
  [[nodiscard]] Matrix dense_hessian() const;

  /// Node states of the condensed dynamics as a trajectory.
  [[nodiscard]] Trajectory states(const Vector& controls) const;

 private:
  TimeGrid grid_;
  std::vector<Matrix> transitions_;
  std::vector<Matrix> inputs_;
  std::vector<Matrix> weights_;
  Vector bounds_;
  Eigen::Index n_x_ = 0;
  Eigen::Index n_g_ = 0;
};

struct BoxQpOptions {
  std::size_t restarts = 8;  // random sign-vertex starts, in addition to the eigenvector start
  std::size_t max_iters = 2000;
  double tol = 1e-12;
  std::uint64_t seed = 42;
};

struct BoxQpResult {
  Vector controls;
  double value = 0.0;
  std::size_t starts = 0;
  std::size_t iterations = 0;
  bool converged = true;
  std::vector<double> objective_history;  // best value after each start
};

/// Builds the condensed QP from a linearization, per-node envelope samples
/// (interval j uses the value at its left node) and per-node weights Q(t_i).
CondensedBoxQP build_state_bound_qp(const LinearizedSystem& lin, const std::vector<Vector>& eps_along,
                                    const MatrixSignal& q);
/// Same with Q = I.
CondensedBoxQP build_state_bound_qp(const LinearizedSystem& lin, const std::vector<Vector>& eps_along);

/// Projected gradient ascent to a stationary point, then sign-vertex polishing
/// with single-coordinate flips, from several starts; keeps the best vertex.
BoxQpResult maximize_box_qp(const CondensedBoxQP& qp, const BoxQpOptions& opts = {});

/// Best value over all 2^dim sign vertices. Only sensible for small dim.
BoxQpResult enumerate_box_qp(const CondensedBoxQP& qp);

enum class BoundKind { StateL2Q, Qoi };

struct BoundDiagnostics {
  std::size_t starts = 0;
  std::size_t iterations = 0;
  bool converged = true;
  std::vector<double> objective_history;
  std::optional<double> refined_value;  // same bound on the bisected grid
  std::optional<double> refinement_delta;  // |refined - value| / max(value, tiny)
};

struct BoundReport {
  BoundKind kind = BoundKind::StateL2Q;
  double value = 0.0;
  std::vector<Vector> certificate;  // per node; node N repeats the last interval's control
  std::optional<Trajectory> delta_x;
  BoundDiagnostics diagnostics;
};

struct StateBoundOptions {
  BoxQpOptions qp;
  bool refinement_check = true;
};

/// Worst-case L2_Q norm of the first-order state error: sqrt(2 * QP optimum).
BoundReport state_error_bound(const LinearizedSystem& lin, const std::vector<Vector>& eps_along,
                              const MatrixSignal& q, const StateBoundOptions& opts = {});
BoundReport state_error_bound(const LinearizedSystem& lin, const std::vector<Vector>& eps_along,
                              const StateBoundOptions& opts = {});

/// int sum_i |w_i| eps_i dt with certificate delta_i = eps_i sign(w_i) (sign(0) := +1).
BoundReport qoi_bound_from_weight(const TimeGrid& grid, const std::vector<Vector>& weight,
                                  const std::vector<Vector>& eps_along);

BoundReport qoi_error_bound(const AdjointResult& adj, const LinearizedSystem& lin, const QoiModel& q,
                            const Trajectory& traj, const ComponentModel& g,
                            const std::vector<Vector>& eps_along);

}  // namespace odesens
