#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "odesens/benchmarks.hpp"
#include "odesens/errors.hpp"
#include "odesens/model.hpp"
#include "oracles.hpp"

using namespace odesens;

namespace {

// f = M x + N g with g = K x.
DynamicsModel linear_dynamics(const Matrix& m, const Matrix& n) {
  DynamicsModel f;
  f.n_x = m.rows();
  f.n_g = n.cols();
  f.rhs = [m, n](double, const Vector& x, const Vector& g) { return (m * x + n * g).eval(); };
  f.jac_x = [m](double, const Vector&, const Vector&) { return m; };
  f.jac_g = [n](double, const Vector&, const Vector&) { return n; };
  return f;
}

ComponentModel linear_component(const Matrix& k) {
  ComponentModel g;
  g.n_x = k.cols();
  g.n_g = k.rows();
  g.value = [k](double, const Vector& x) { return (k * x).eval(); };
  g.jacobian = [k](double, const Vector&) { return k; };
  return g;
}

ComponentModel constant_component(const Vector& c, Eigen::Index n_x) {
  ComponentModel g;
  g.n_x = n_x;
  g.n_g = c.size();
  g.value = [c](double, const Vector&) { return c; };
  g.jacobian = [c, n_x](double, const Vector&) { return Matrix::Zero(c.size(), n_x).eval(); };
  g.hessian = [c, n_x](double, const Vector&) {
    return std::vector<Matrix>(static_cast<std::size_t>(c.size()), Matrix::Zero(n_x, n_x));
  };
  return g;
}

Trajectory single_node(const Vector& x) {
  return Trajectory(TimeGrid({0.0, 1.0}), {x, x});
}

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (std::log(xs[i]) - mx) * (std::log(ys[i]) - my);
    den += (std::log(xs[i]) - mx) * (std::log(xs[i]) - mx);
  }
  return num / den;
}

}  // namespace

TEST_CASE("eval_rhs on the benchmarks") {
  const BenchmarkProblem z = build_zermelo(0.0);
  const Vector dz = eval_rhs(z.dynamics, z.g_star, 0.0, Vector::Zero(2));
  const auto ref = oracle::zermelo_field(0.0)(0.0, {0.0, 0.0});
  CHECK(dz[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dz[1] == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-12));
  CHECK(dz[1] == doctest::Approx(ref[1]).epsilon(1e-14));

  const BenchmarkProblem h = build_hypersonic(0.0);
  const Vector dh = eval_rhs(h.dynamics, h.g_star, 0.0, h.x0);
  CHECK(dh[0] == doctest::Approx(5.0 * std::cos(5.0 * std::numbers::pi / 180)).epsilon(1e-12));
  CHECK(std::abs(dh[0] - 4.98097) < 1e-5);
  const auto href = oracle::hypersonic_field(0.0)(0.0, {0.0, 80.0, 5000.0, -5.0 * std::numbers::pi / 180});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(dh[i] == doctest::Approx(href[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("eval_rhs: zero dynamics and non-finite output") {
  DynamicsModel zero = linear_dynamics(Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  CHECK(eval_rhs(zero, linear_component(Matrix::Ones(1, 2)), 0.3, Vector::Ones(2)).isZero());

  DynamicsModel bad = zero;
  bad.rhs = [](double, const Vector&, const Vector&) {
    return Vector::Constant(2, std::numeric_limits<double>::infinity()).eval();
  };
  try {
    (void)eval_rhs(bad, linear_component(Matrix::Ones(1, 2)), 0.25, Vector::Ones(2));
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.time() == 0.25);
  }
}

TEST_CASE("linearize") {
  SUBCASE("Zermelo at the origin") {
    const BenchmarkProblem z = build_zermelo(0.0);
    const LinearizedSystem lin = linearize(z.dynamics, z.g_star, single_node(Vector::Zero(2)));
    Matrix a(2, 2);
    a << 0, 10, 0, 0;
    CHECK((lin.a[0] - a).norm() < 1e-14);
    CHECK(lin.b[0].isZero());
    CHECK(zermelo::current_slope(0.0, 0.0) == -2.0);
  }
  SUBCASE("identity composition") {
    DynamicsModel f;
    f.n_x = 3;
    f.n_g = 3;
    f.rhs = [](double, const Vector&, const Vector& g) { return g; };
    f.jac_x = [](double, const Vector&, const Vector&) { return Matrix::Zero(3, 3).eval(); };
    f.jac_g = [](double, const Vector&, const Vector&) { return Matrix::Identity(3, 3).eval(); };
    const LinearizedSystem lin = linearize(f, linear_component(Matrix::Identity(3, 3)), single_node(Vector::Ones(3)));
    CHECK(lin.a[0].isIdentity());
    CHECK(lin.b[1].isIdentity());
  }
  SUBCASE("g-independent dynamics") {
    Matrix m(2, 2);
    m << 1, 2, 3, 4;
    const LinearizedSystem lin =
        linearize(linear_dynamics(m, Matrix::Zero(2, 1)), linear_component(Matrix::Ones(1, 2)), single_node(Vector::Ones(2)));
    CHECK(lin.a[0] == m);
    CHECK(lin.b[0].isZero());
  }
  SUBCASE("shape mismatch") {
    const BenchmarkProblem z = build_zermelo(0.0);
    CHECK_THROWS_AS((void)linearize(z.dynamics, z.g_star, single_node(Vector::Zero(3))), DimensionError);
  }
}

TEST_CASE("linearization matches the directional derivative of the closed loop") {
  const BenchmarkProblem z = build_zermelo(0.2);
  const double t = 0.3;
  Vector x(2);
  x << -2.0, 0.05;
  Vector v(2);
  v << 0.6, 0.8;
  const Vector dir = Vector::Constant(1, 0.7);
  const LinearizedSystem lin = linearize(z.dynamics, z.g_eps, single_node(x));
  const Vector exact = lin.a[0] * v + lin.b[0] * dir;
  auto f = [&](double h) {
    const Vector xs = x + h * v;
    return z.dynamics.rhs(t, xs, z.g_eps.value(t, xs) + h * dir);
  };
  std::vector<double> hs{1e-2, 1e-3, 1e-4, 1e-5}, errs;
  // `exact` is at t; re-evaluate A at t instead of the node time 0.
  const Matrix a = closed_loop_jacobian(z.dynamics, z.g_eps, t, x);
  const Vector target = a * v + z.dynamics.jac_g(t, x, z.g_eps.value(t, x)) * dir;
  CHECK((target - exact).norm() < 1e-12);  // the Zermelo Jacobians do not depend on t
  for (double h : hs) errs.push_back(((f(h) - f(-h)) / (2 * h) - target).norm());
  CHECK(slope(hs, errs) >= 1.9);
}

TEST_CASE("check_derivatives") {
  SUBCASE("linear model is exact") {
    Matrix m(2, 2), n(2, 1);
    m << 1, -2, 0.5, 3;
    n << 4, -1;
    std::vector<ProbePoint> pts{{0.0, Vector::Ones(2), Vector::Ones(1)}, {0.5, Vector::Constant(2, -3.0), Vector::Constant(1, 2.0)}};
    CHECK(check_derivatives(linear_dynamics(m, n), pts, 1e-5).max() <= 1e-10);
  }
  SUBCASE("Zermelo dynamics over random probes") {
    const BenchmarkProblem z = build_zermelo(0.1);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<ProbePoint> pts;
    while (pts.size() < 100) {
      Vector x(2);
      x << 4 * u(rng), 4 * u(rng);
      if (x.norm() > 4) continue;
      const double t = 0.5 * (u(rng) + 1);
      pts.push_back({t, x, z.g_star.value(t, x)});
    }
    const DerivativeReport r = check_derivatives(z.dynamics, pts, 1e-6);
    CHECK(r.max() <= 1e-6);
    CHECK(r.worst.count("f_x") == 1);
    CHECK(r.worst.count("f_g") == 1);
    CHECK(check_derivatives(z.g_star, pts, 1e-6).max() <= 1e-6);
    CHECK(check_derivatives(z.g_eps, pts, 1e-6).max() <= 1e-6);
    CHECK(check_derivatives(z.qoi, pts, 1e-6).max() <= 1e-6);
  }
  SUBCASE("hypersonic models") {
    const BenchmarkProblem h = build_hypersonic(0.05);
    const auto traj = oracle::rk4(oracle::hypersonic_field(0.0), {0.0, 80.0, 5000.0, -5.0 * std::numbers::pi / 180},
                                  0.0, 200.0, 2000);
    std::vector<ProbePoint> pts;
    for (std::size_t i = 0; i < traj.size(); i += 100) {
      const double t = 0.1 * static_cast<double>(i);
      const Vector x = oracle::to_vec(traj[i]);
      pts.push_back({t, x, h.g_star.value(t, x)});
    }
    CHECK(check_derivatives(h.dynamics, pts).max() <= 1e-5);
    CHECK(check_derivatives(h.g_eps, pts).max() <= 1e-8);
    CHECK(check_derivatives(h.qoi, pts).max() <= 1e-8);
  }
  SUBCASE("a planted sign error is detected") {
    BenchmarkProblem z = build_zermelo(0.1);
    const auto good = z.dynamics.jac_g;
    z.dynamics.jac_g = [good](double t, const Vector& x, const Vector& g) { return (-good(t, x, g)).eval(); };
    Vector x(2);
    x << 1.0, 2.0;
    const std::vector<ProbePoint> pts{{0.2, x, z.g_star.value(0.2, x)}};
    CHECK(check_derivatives(z.dynamics, pts).worst.at("f_g") >= 1.0);
  }
}

TEST_CASE("model_deviation") {
  const BenchmarkProblem z = build_zermelo(0.1);
  const Trajectory at_origin = single_node(Vector::Zero(2));

  const DeviationReport same = model_deviation(z.g_star, z.g_star, at_origin);
  for (const auto& d : same.delta) CHECK(d.isZero());
  CHECK(same.violations.empty());

  const DeviationReport dev = model_deviation(z.g_eps, z.g_star, at_origin, z.envelope);
  CHECK(dev.delta[0][0] == doctest::Approx(-0.8).epsilon(1e-13));
  CHECK(std::abs(dev.delta[0][0]) == doctest::Approx(0.8).epsilon(1e-13));

  std::vector<Vector> xs;
  const TimeGrid g = TimeGrid::uniform(0, 1, 21);
  for (double t : g.nodes()) xs.push_back((Vector(2) << 4 * t - 1, t).finished());
  const Trajectory line(g, xs);
  const DeviationReport tight = model_deviation(z.g_eps, z.g_star, line, z.envelope);
  CHECK(tight.violations.empty());
  const DeviationReport swapped = model_deviation(z.g_star, z.g_eps, line);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(swapped.delta[i] == -tight.delta[i]);

  ErrorEnvelope half = z.envelope;
  half.bound = [env = z.envelope](double t, const Vector& x) { return (0.5 * env.bound(t, x)).eval(); };
  CHECK(!model_deviation(z.g_eps, z.g_star, line, half).violations.empty());

  CHECK_THROWS_AS((void)model_deviation(z.g_eps, build_hypersonic(0.0).g_star, line), DimensionError);
}

TEST_CASE("sample_envelope rejects negative values") {
  ErrorEnvelope env;
  env.n_g = 1;
  env.bound = [](double t, const Vector&) { return Vector::Constant(1, t - 0.5); };
  const TimeGrid g = TimeGrid::uniform(0, 1, 3);
  CHECK_THROWS_AS((void)sample_envelope(env, Trajectory(g, {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)})),
                  ValidationError);
}

TEST_CASE("gnorm_sampled") {
  SampleBox box;
  box.t_lo = 0;
  box.t_hi = 1;
  box.x_lo = Vector::Constant(1, -2.0);
  box.x_hi = Vector::Constant(1, 2.0);
  box.t_count = 3;

  Vector c(2);
  c << 3, 4;
  CHECK(gnorm_sampled(constant_component(c, 1), 0, box) == doctest::Approx(5.0));
  CHECK(gnorm_sampled(constant_component(Vector::Zero(2), 1), 0, box) == 0.0);
  CHECK(gnorm_sampled(constant_component(Vector::Zero(2), 1), 1, box) == 0.0);
  CHECK(gnorm_sampled(constant_component(Vector::Zero(2), 1), 2, box) == 0.0);

  const ComponentModel ident = linear_component(Matrix::Identity(1, 1));
  CHECK(gnorm_sampled(ident, 1, box) == doctest::Approx(3.0));
  CHECK_THROWS_AS((void)gnorm_sampled(ident, 2, box), CapabilityError);

  const BenchmarkProblem z = build_zermelo(0.0);
  SampleBox zb;
  zb.t_lo = 0;
  zb.t_hi = 1;
  zb.x_lo = Vector::Constant(2, -1.0);
  zb.x_hi = Vector::Constant(2, 3.0);
  SampleBox inner = zb;
  inner.x_lo = Vector::Constant(2, 0.0);
  inner.x_hi = Vector::Constant(2, 2.0);
  inner.x_count = 3;  // nodes {0, 1, 2} are also nodes of the outer 11-point grid
  zb.x_count = 5;     // nodes {-1, 0, 1, 2, 3}
  const double n0 = gnorm_sampled(z.g_star, 0, zb);
  const double n1 = gnorm_sampled(z.g_star, 1, zb);
  const double n2 = gnorm_sampled(z.g_star, 2, zb);
  CHECK(n0 <= n1);
  CHECK(n1 <= n2);
  for (int k = 0; k <= 2; ++k) CHECK(gnorm_sampled(z.g_star, k, inner) <= gnorm_sampled(z.g_star, k, zb));
  // sup |g_*| over x1 in [-1, 3] is |g_*(-1)| = |2 - 10 + 27| = 19 vs g_*(3) = 31.
  CHECK(n0 == doctest::Approx(31.0));
}

TEST_CASE("benchmark construction") {
  CHECK(zermelo::current(0.0, 0.0) == 10.0);
  CHECK(zermelo::current(2.0, 0.0) == 22.0);
  CHECK(zermelo::heading(0.0) == doctest::Approx(std::numbers::pi / 3));
  CHECK(zermelo::heading(1.0) == doctest::Approx(-std::numbers::pi / 3));
  CHECK(zermelo::current_slope(0.5, 0.0) == doctest::Approx(10 - 3 * 2.25));

  const BenchmarkProblem z0 = build_zermelo(0.0);
  for (double x1 : {-1.0, 0.5, 2.0, 3.7}) {
    const Vector x = (Vector(2) << x1, 0.3).finished();
    CHECK(z0.g_eps.value(0.1, x) == z0.g_star.value(0.1, x));
    CHECK(z0.envelope.bound(0.1, x)[0] == 0.0);
    CHECK(z0.g_star.value(0.1, x)[0] == doctest::Approx(oracle::zermelo_g(x1, 0.0)));
  }

  const double alpha = 10.0 * std::numbers::pi / 180;
  CHECK(hypersonic::angle_of_attack(0.0) == doctest::Approx(alpha));
  CHECK(hypersonic::lift_coefficient(alpha, 0.0) == doctest::Approx(-0.04 + 0.8 * 0.17453292519943295));
  CHECK(std::abs(hypersonic::lift_coefficient(alpha, 0.0) - 0.09963) < 1e-5);
  CHECK(hypersonic::density(80.0) == doctest::Approx(1.225 * std::exp(-11.2)));
  const BenchmarkProblem h0 = build_hypersonic(0.0);
  for (double t : {0.0, 700.0, 2000.0}) CHECK(h0.g_eps.value(t, h0.x0) == h0.g_star.value(t, h0.x0));
  CHECK(h0.qoi.terminal_grad(h0.x0) == (Vector(4) << 1, 0, 0, 0).finished());
}
