/**
 * @file benchmarks.hpp
 * @brief Built-in test problems: Zermelo river crossing and a hypersonic glide
 *        vehicle in longitudinal flight.
 */
#pragma once

#include <string>
#include <vector>

#include "odesens/model.hpp"

namespace odesens {

/// Everything needed to run a perturbation study: dynamics, the true and the
/// perturbed component function, a QoI, an envelope of their difference, and
/// the initial value problem data.
struct BenchmarkProblem {
  std::string name;
  DynamicsModel dynamics;
  ComponentModel g_star;
  ComponentModel g_eps;
  QoiModel qoi;
  ErrorEnvelope envelope;
  Vector x0;
  double t0 = 0.0;
  double tf = 1.0;
  double lipschitz = 1.0;  // default Gronwall constant
  std::vector<std::string> state_names;
  /// Multiplier applied to each state when written to tables (e.g. rad -> deg).
  std::vector<double> display_scale;
};

namespace zermelo {

/// Heading angle u(t) = (1 - 2t) pi / 3.
double heading(double t);
/// g(x1) = 2 + 10 x1 - (1 - eps)(x1 - 2)^3; eps = 0 gives the true current.
double current(double x1, double eps);
double current_slope(double x1, double eps);

}  // namespace zermelo

BenchmarkProblem build_zermelo(double epsilon);

namespace hypersonic {

inline constexpr double kMass = 1200.0;             // kg
inline constexpr double kArea = 10.0;               // m^2
inline constexpr double kMu = 3.986e14;             // m^3/s^2
inline constexpr double kEarthRadius = 6.371e6;     // m
inline constexpr double kHorizon = 2000.0;          // s

/// Angle of attack in radians: (10 - 4 t / 2000) degrees.
double angle_of_attack(double t);
/// kg/m^3, altitude in km.
double density(double altitude_km);
/// m/s^2, altitude in km.
double gravity(double altitude_km);
double lift_coefficient(double alpha, double eps);
double drag_coefficient(double alpha, double eps);

}  // namespace hypersonic

/// State (x1 [km], x2 [km], v [m/s], gamma [rad]); g = (C_L, C_D) of alpha(t).
BenchmarkProblem build_hypersonic(double epsilon);

}  // namespace odesens
