#include "odesens/gronwall.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "odesens/errors.hpp"

namespace odesens {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) {
    return b;
  }
  if (b == kNegInf) {
    return a;
  }
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

}  // namespace

Vector symmetric_eigenvalues(const Matrix& s, double tol) {
  if (s.rows() != s.cols()) {
    throw DimensionError("symmetric_eigenvalues: matrix must be square");
  }
  Matrix m = 0.5 * (s + s.transpose());
  const Eigen::Index n = m.rows();
  const double scale = m.norm();
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        off += 2.0 * m(p, q) * m(p, q);
      }
    }
    if (std::sqrt(off) <= tol * scale || off == 0.0) {
      break;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) {
          continue;
        }
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - sn * mkq;
          m(k, q) = sn * mkp + c * mkq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - sn * mqk;
          m(q, k) = sn * mpk + c * mqk;
        }
      }
    }
  }
  Vector ev = m.diagonal();
  std::sort(ev.begin(), ev.end());
  return ev;
}

double log_norm(const Matrix& a, const Matrix& q) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
    throw DimensionError("log_norm: A and Q must be square matrices of the same size");
  }
  if (!is_symmetric(q)) {
    throw DefinitenessError("log_norm: weight matrix is not symmetric");
  }
  const Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) {
    throw DefinitenessError("log_norm: weight matrix is not positive definite");
  }
  const Matrix c = llt.matrixL();
  // M = C^T A C^{-T}
  const Matrix ct_a = c.transpose() * a;
  const Matrix m = c.triangularView<Eigen::Lower>().solve(ct_a.transpose()).transpose();
  const Vector ev = symmetric_eigenvalues(0.5 * (m + m.transpose()));
  return ev[ev.size() - 1];
}

LogLipschitzSignal log_lipschitz_along(const DynamicsModel& f, const ComponentModel& g,
                                       const Trajectory& traj, const Matrix& q) {
  const LinearizedSystem lin = linearize(f, g, traj);
  std::vector<double> values(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    values[i] = log_norm(lin.a[i], q);
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << "non-finite logarithmic norm at t = " << traj.grid[i];
      throw EvaluationError(os.str(), traj.grid[i]);
    }
  }
  return {traj.grid, std::move(values)};
}

GronwallReport gronwall_state_bound(const LogLipschitzSignal& llip,
                                    const std::vector<double>& eps_along, double lipschitz,
                                    double cap, const Matrix& weight) {
  const TimeGrid& grid = llip.grid;
  if (eps_along.size() != grid.size() || llip.values.size() != grid.size()) {
    throw DimensionError("gronwall_state_bound: samples do not match the grid");
  }
  if (!(lipschitz >= 0.0)) {
    throw ValidationError("gronwall_state_bound: Lipschitz constant must be nonnegative");
  }
  for (std::size_t i = 0; i < eps_along.size(); ++i) {
    if (!(eps_along[i] >= 0.0)) {
      std::ostringstream os;
      os << "gronwall_state_bound: negative envelope at t = " << grid[i];
      throw ValidationError(os.str());
    }
  }
  GronwallReport rep{grid, std::vector<double>(grid.size(), 0.0), lipschitz,
                     weight,  cap, false, std::vector<double>(grid.size(), kNegInf)};
  const double log_l = safe_log(lipschitz);
  double log_j = kNegInf;  // log of E / L
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid.step(i - 1);
    const double growth = 0.5 * h * (llip.values[i - 1] + llip.values[i]);
    const double log_half_h = std::log(0.5 * h);
    log_j = log_add(log_j + growth, log_half_h + safe_log(eps_along[i - 1]) + growth);
    log_j = log_add(log_j, log_half_h + safe_log(eps_along[i]));
    rep.log_bound[i] = log_j == kNegInf || log_l == kNegInf ? kNegInf : log_j + log_l;
    if (rep.log_bound[i] == kNegInf) {
      rep.bound[i] = 0.0;
    } else if (rep.log_bound[i] > std::log(cap)) {
      rep.bound[i] = cap;
      rep.capped = true;
    } else {
      rep.bound[i] = std::exp(rep.log_bound[i]);
    }
  }
  return rep;
}

std::vector<double> lemma_comparison(double e0, const std::vector<double>& alpha,
                                     const std::vector<double>& beta, const TimeGrid& grid) {
  if (alpha.size() != grid.size() || beta.size() != grid.size()) {
    throw DimensionError("lemma_comparison: samples do not match the grid");
  }
  std::vector<double> e(grid.size());
  e[0] = e0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid.step(i - 1);
    const double growth = std::exp(0.5 * h * (beta[i - 1] + beta[i]));
    e[i] = growth * e[i - 1] + 0.5 * h * (alpha[i - 1] * growth + alpha[i]);
  }
  return e;
}

}  // namespace odesens
