#include "odesens/benchmarks.hpp"

#include <cmath>
#include <numbers>

namespace odesens {

namespace zermelo {

double heading(double t) { return (1.0 - 2.0 * t) * std::numbers::pi / 3.0; }

double current(double x1, double eps) {
  const double d = x1 - 2.0;
  return 2.0 + 10.0 * x1 - (1.0 - eps) * d * d * d;
}

double current_slope(double x1, double eps) {
  const double d = x1 - 2.0;
  return 10.0 - 3.0 * (1.0 - eps) * d * d;
}

namespace {

ComponentModel current_model(double eps) {
  ComponentModel g;
  g.n_x = 2;
  g.n_g = 1;
  g.value = [eps](double, const Vector& x) { return Vector::Constant(1, current(x[0], eps)); };
  g.jacobian = [eps](double, const Vector& x) {
    Matrix j = Matrix::Zero(1, 2);
    j(0, 0) = current_slope(x[0], eps);
    return j;
  };
  g.hessian = [eps](double, const Vector& x) {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = -6.0 * (1.0 - eps) * (x[0] - 2.0);
    return std::vector<Matrix>{h};
  };
  return g;
}

// Speed of the boat, |x'|, written in terms of (t, x, g).
constexpr double kSpeedFloor = 1e-12;

}  // namespace

}  // namespace zermelo

BenchmarkProblem build_zermelo(double epsilon) {
  using namespace zermelo;
  BenchmarkProblem p;
  p.name = "zermelo";

  p.dynamics.n_x = 2;
  p.dynamics.n_g = 1;
  p.dynamics.rhs = [](double t, const Vector& x, const Vector& g) {
    const double u = heading(t);
    Vector dx(2);
    dx << std::cos(u) + g[0] * x[1], std::sin(u);
    return dx;
  };
  p.dynamics.jac_x = [](double, const Vector&, const Vector& g) {
    Matrix j = Matrix::Zero(2, 2);
    j(0, 1) = g[0];
    return j;
  };
  p.dynamics.jac_g = [](double, const Vector& x, const Vector&) {
    Matrix j = Matrix::Zero(2, 1);
    j(0, 0) = x[1];
    return j;
  };

  p.g_star = current_model(0.0);
  p.g_eps = current_model(epsilon);

  p.qoi.terminal = [](const Vector&) { return 0.0; };
  p.qoi.terminal_grad = [](const Vector& x) { return Vector::Zero(x.size()).eval(); };
  p.qoi.running = [](double t, const Vector& x, const Vector& g) {
    const double u = heading(t);
    const double s = std::cos(u) + g[0] * x[1];
    return std::hypot(s, std::sin(u));
  };
  p.qoi.running_grad_x = [](double t, const Vector& x, const Vector& g) {
    const double u = heading(t);
    const double s = std::cos(u) + g[0] * x[1];
    const double speed = std::hypot(s, std::sin(u));
    Vector grad = Vector::Zero(2);
    if (speed >= kSpeedFloor) {
      grad[1] = s * g[0] / speed;
    }
    return grad;
  };
  p.qoi.running_grad_g = [](double t, const Vector& x, const Vector& g) {
    const double u = heading(t);
    const double s = std::cos(u) + g[0] * x[1];
    const double speed = std::hypot(s, std::sin(u));
    Vector grad = Vector::Zero(1);
    if (speed >= kSpeedFloor) {
      grad[0] = s * x[1] / speed;
    }
    return grad;
  };

  p.envelope.n_g = 1;
  p.envelope.bound = [epsilon](double, const Vector& x) {
    const double d = x[0] - 2.0;
    return Vector::Constant(1, std::abs(epsilon * d * d * d));
  };

  p.x0 = Vector::Zero(2);
  p.t0 = 0.0;
  p.tf = 1.0;
  p.lipschitz = 4.0;
  p.state_names = {"x1", "x2"};
  p.display_scale = {1.0, 1.0};
  return p;
}

namespace hypersonic {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kDensityScale = 0.14;  // 1/km

}  // namespace

double angle_of_attack(double t) { return (10.0 - (t / kHorizon) * 4.0) * kDeg; }

double density(double altitude_km) { return 1.225 * std::exp(-kDensityScale * altitude_km); }

double gravity(double altitude_km) {
  const double r = kEarthRadius + 1000.0 * altitude_km;
  return kMu / (r * r);
}

double lift_coefficient(double alpha, double eps) { return -0.04 + (0.8 + eps) * alpha; }

double drag_coefficient(double alpha, double eps) {
  return 0.012 - 0.01 * alpha + (0.6 - eps) * alpha * alpha;
}

namespace {

ComponentModel coefficient_model(double eps) {
  ComponentModel g;
  g.n_x = 4;
  g.n_g = 2;
  g.value = [eps](double t, const Vector&) {
    const double alpha = angle_of_attack(t);
    Vector c(2);
    c << lift_coefficient(alpha, eps), drag_coefficient(alpha, eps);
    return c;
  };
  g.jacobian = [](double, const Vector&) { return Matrix::Zero(2, 4).eval(); };
  g.hessian = [](double, const Vector&) {
    return std::vector<Matrix>{Matrix::Zero(4, 4), Matrix::Zero(4, 4)};
  };
  return g;
}

}  // namespace

}  // namespace hypersonic

BenchmarkProblem build_hypersonic(double epsilon) {
  using namespace hypersonic;
  BenchmarkProblem p;
  p.name = "hypersonic";

  p.dynamics.n_x = 4;
  p.dynamics.n_g = 2;
  // x = (x1 [km], x2 [km], v [m/s], gamma [rad]), g = (C_L, C_D).
  p.dynamics.rhs = [](double, const Vector& x, const Vector& g) {
    const double h = x[1];
    const double v = x[2];
    const double gam = x[3];
    const double qbar = 0.5 * density(h) * v * v;
    const double lift = qbar * g[0] * kArea;
    const double drag = qbar * g[1] * kArea;
    const double grav = gravity(h);
    const double r = kEarthRadius + 1000.0 * h;
    Vector dx(4);
    dx << v * std::cos(gam) / 1000.0,  //
        v * std::sin(gam) / 1000.0,    //
        -(drag + kMass * grav * std::sin(gam)) / kMass,
        (lift - kMass * grav * std::cos(gam) + kMass * v * v * std::cos(gam) / r) / (kMass * v);
    return dx;
  };
  p.dynamics.jac_x = [](double, const Vector& x, const Vector& g) {
    const double h = x[1];
    const double v = x[2];
    const double gam = x[3];
    const double cg = std::cos(gam);
    const double sg = std::sin(gam);
    const double rho = density(h);
    const double r = kEarthRadius + 1000.0 * h;
    const double grav = gravity(h);
    const double dgrav = -2.0 * kMu / (r * r * r) * 1000.0;  // per km
    const double drag = 0.5 * rho * v * v * g[1] * kArea;
    const double lift_per_mv = 0.5 * rho * v * g[0] * kArea / kMass;  // L / (m v)
    Matrix j = Matrix::Zero(4, 4);
    j(0, 2) = cg / 1000.0;
    j(0, 3) = -v * sg / 1000.0;
    j(1, 2) = sg / 1000.0;
    j(1, 3) = v * cg / 1000.0;
    j(2, 1) = kDensityScale * drag / kMass - dgrav * sg;
    j(2, 2) = -rho * v * g[1] * kArea / kMass;
    j(2, 3) = -grav * cg;
    j(3, 1) = -kDensityScale * lift_per_mv - dgrav * cg / v - v * cg * 1000.0 / (r * r);
    j(3, 2) = 0.5 * rho * g[0] * kArea / kMass + grav * cg / (v * v) + cg / r;
    j(3, 3) = grav * sg / v - v * sg / r;
    return j;
  };
  p.dynamics.jac_g = [](double, const Vector& x, const Vector&) {
    const double v = x[2];
    const double qbar = 0.5 * density(x[1]) * v * v;
    Matrix j = Matrix::Zero(4, 2);
    j(2, 1) = -qbar * kArea / kMass;
    j(3, 0) = qbar * kArea / (kMass * v);
    return j;
  };

  p.g_star = coefficient_model(0.0);
  p.g_eps = coefficient_model(epsilon);

  // Downrange x1(tf).
  p.qoi.terminal = [](const Vector& x) { return x[0]; };
  p.qoi.terminal_grad = [](const Vector& x) {
    Vector grad = Vector::Zero(x.size());
    grad[0] = 1.0;
    return grad;
  };

  p.envelope.n_g = 2;
  p.envelope.bound = [epsilon](double t, const Vector&) {
    const double alpha = angle_of_attack(t);
    Vector e(2);
    e << std::abs(epsilon) * std::abs(alpha), std::abs(epsilon) * alpha * alpha;
    return e;
  };

  p.x0.resize(4);
  p.x0 << 0.0, 80.0, 5000.0, -5.0 * std::numbers::pi / 180.0;
  p.t0 = 0.0;
  p.tf = kHorizon;
  p.lipschitz = 1.0;
  p.state_names = {"x1_km", "x2_km", "v_mps", "gamma_deg"};
  p.display_scale = {1.0, 1.0, 1.0, 180.0 / std::numbers::pi};
  return p;
}

}  // namespace odesens
