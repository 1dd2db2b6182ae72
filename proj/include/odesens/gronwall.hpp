/**
 * @file gronwall.hpp
 * @brief Logarithmic norms and the classical Gronwall-type perturbation bound.
 *
 * The local logarithmic Lipschitz constant of x -> f(t, x, g(t, x)) is
 * approximated by the logarithmic norm of the closed-loop Jacobian A(t, x);
 * the O(|x - y|) remainder of that approximation is ignored.
 */
#pragma once

#include <vector>

#include "odesens/model.hpp"
#include "odesens/ode.hpp"

namespace odesens {

struct LogLipschitzSignal {
  TimeGrid grid;
  std::vector<double> values;
};

struct GronwallReport {
  TimeGrid grid;
  std::vector<double> bound;  // E(t_i), clamped at `cap`
  double lipschitz = 1.0;     // L used
  Matrix weight;              // Q used
  double cap = 1e10;
  bool capped = false;
  std::vector<double> log_bound;  // log E(t_i) before clamping; -inf where E = 0
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Sweeps stop once the off-diagonal mass drops below `tol` times the Frobenius norm.
Vector symmetric_eigenvalues(const Matrix& s, double tol = 1e-12);

/// Logarithmic norm of `a` in the norm |x|_Q = sqrt(x^T Q x): the largest
/// eigenvalue of (C^T A C^{-T} + C^{-1} A^T C) / 2 with Q = C C^T.
double log_norm(const Matrix& a, const Matrix& q);

LogLipschitzSignal log_lipschitz_along(const DynamicsModel& f, const ComponentModel& g,
                                       const Trajectory& traj, const Matrix& q);

inline constexpr double kDefaultBoundCap = 1e10;

/// E(t_i) = L * integral_0^{t_i} eps(s) exp(Phi(t_i) - Phi(s)) ds with
/// Phi = cumulative integral of the log-Lipschitz signal. Accumulated in log
/// space; values above `cap` are clamped and flagged.
GronwallReport gronwall_state_bound(const LogLipschitzSignal& llip, const std::vector<double>& eps_along,
                                    double lipschitz, double cap = kDefaultBoundCap,
                                    const Matrix& weight = Matrix());

/// e0 exp(int_0^t beta) + int_0^t alpha(s) exp(int_s^t beta) ds on the grid.
std::vector<double> lemma_comparison(double e0, const std::vector<double>& alpha,
                                     const std::vector<double>& beta, const TimeGrid& grid);

}  // namespace odesens
