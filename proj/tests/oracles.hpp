#pragma once

// Independent reference computations used only by the tests.

#include "convexreg/lse.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using convexreg::PointMatrix;
using convexreg::Vector;

// Least squares over d=1 convex sequences (optionally |theta| <= bound) by
// enumerating every subset of active inequality rows.
inline Vector brute_force_1d(const Vector& x, const Vector& y, double bound = -1.0) {
  const int n = static_cast<int>(x.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });

  // rows a . theta <= c
  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (int k = 0; k + 2 < n; ++k) {
    const int i = order[k], j = order[k + 1], l = order[k + 2];
    const double h1 = x[j] - x[i], h2 = x[l] - x[j];
    Vector a = Vector::Zero(n);
    // slope(i,j) - slope(j,l) <= 0
    a[i] -= 1.0 / h1;
    a[j] += 1.0 / h1 + 1.0 / h2;
    a[l] -= 1.0 / h2;
    rows.push_back(a);
    rhs.push_back(0.0);
  }
  if (bound >= 0.0) {
    for (int i = 0; i < n; ++i) {
      Vector a = Vector::Zero(n);
      a[i] = 1.0;
      rows.push_back(a);
      rhs.push_back(bound);
      rows.push_back(-a);
      rhs.push_back(bound);
    }
  }
  const int m = static_cast<int>(rows.size());
  Vector best = y;
  double best_obj = std::numeric_limits<double>::infinity();
  for (long mask = 0; mask < (1L << m); ++mask) {
    std::vector<int> act;
    for (int r = 0; r < m; ++r)
      if (mask & (1L << r)) act.push_back(r);
    const int k = static_cast<int>(act.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    Vector b = Vector::Zero(n + k);
    kkt.topLeftCorner(n, n).setIdentity();
    b.head(n) = y;
    for (int q = 0; q < k; ++q) {
      kkt.block(0, n + q, n, 1) = rows[static_cast<std::size_t>(act[q])];
      kkt.block(n + q, 0, 1, n) = rows[static_cast<std::size_t>(act[q])].transpose();
      b[n + q] = rhs[static_cast<std::size_t>(act[q])];
    }
    const auto qr = kkt.colPivHouseholderQr();
    const Vector sol = qr.solve(b);
    if (!((kkt * sol - b).norm() <= 1e-9 * (1.0 + b.norm()))) continue;
    const Vector th = sol.head(n);
    bool ok = true;
    for (int r = 0; r < m && ok; ++r) ok = rows[static_cast<std::size_t>(r)].dot(th) <= rhs[static_cast<std::size_t>(r)] + 1e-10;
    if (!ok) continue;
    const double obj = (th - y).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = th;
    }
  }
  return best;
}

// sup of xi.(theta - f)/n over the convex cone intersected with the ball
// |theta - f| <= t sqrt(n): theta(s) = Proj(f + s xi), bisection on s.
inline double path_bisection_sup(const PointMatrix& x, const Vector& f, double t, const Vector& xi,
                                 const convexreg::SolverConfig& cfg) {
  const int n = static_cast<int>(x.rows());
  const double r = t * std::sqrt(static_cast<double>(n));
  auto proj = [&](double s) {
    convexreg::RegressionProblem p(x, f + s * xi);
    return convexreg::fit(p, cfg).theta;
  };
  double lo = 0.0, hi = 1.0;
  while ((proj(hi) - f).norm() < r && hi < 1e6) hi *= 2.0;
  if ((proj(hi) - f).norm() < r) return xi.dot(proj(hi) - f) / n;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((proj(mid) - f).norm() < r ? lo : hi) = mid;
  }
  return xi.dot(proj(0.5 * (lo + hi)) - f) / n;
}

}  // namespace oracle
