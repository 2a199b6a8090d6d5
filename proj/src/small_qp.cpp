#include "convexreg/small_qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace convexreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Invariant maintained throughout: J^T [c_a1 ... c_aq] = [R; 0] with J
// orthogonal and R upper triangular (q x q in the leading block).
struct Factorization {
  Matrix J;
  Matrix R;
  int q = 0;

  explicit Factorization(int n) : J(Matrix::Identity(n, n)), R(Matrix::Zero(n, n)) {}

  // `d` = J^T c for the constraint being added. False if it is dependent.
  bool add(Vector d) {
    const int n = static_cast<int>(J.rows());
    for (int j = n - 1; j >= q + 1; --j) {
      const double h = std::hypot(d[j - 1], d[j]);
      if (h == 0.0) continue;
      const double c = d[j - 1] / h;
      const double s = d[j] / h;
      d[j - 1] = h;
      d[j] = 0.0;
      const Vector a = J.col(j - 1);
      const Vector b = J.col(j);
      J.col(j - 1) = c * a + s * b;
      J.col(j) = -s * a + c * b;
    }
    if (q >= n || std::abs(d[q]) <= 1e-13 * std::max(1.0, d.norm())) return false;
    R.col(q).head(q + 1) = d.head(q + 1);
    ++q;
    return true;
  }

  void remove(int l) {
    for (int k = l; k < q - 1; ++k) R.col(k) = R.col(k + 1);
    R.col(q - 1).setZero();
    --q;
    for (int j = l; j < q; ++j) {
      const double h = std::hypot(R(j, j), R(j + 1, j));
      if (h == 0.0) continue;
      const double c = R(j, j) / h;
      const double s = R(j + 1, j) / h;
      for (int k = j; k < q; ++k) {
        const double a = R(j, k);
        const double b = R(j + 1, k);
        R(j, k) = c * a + s * b;
        R(j + 1, k) = -s * a + c * b;
      }
      R(j + 1, j) = 0.0;
      const Vector a = J.col(j);
      const Vector b = J.col(j + 1);
      J.col(j) = c * a + s * b;
      J.col(j + 1) = -s * a + c * b;
    }
  }
};

}  // namespace

std::optional<Vector> min_norm_point(const PointMatrix& normals, const Vector& bounds, double tol) {
  const int n = static_cast<int>(normals.cols());
  const int m = static_cast<int>(normals.rows());
  Vector x = Vector::Zero(n);
  Factorization f(n);
  std::vector<int> active;
  std::vector<double> u;
  // In G-I form the constraints are c_k . x >= b_k with c_k = -normal_k.
  auto slack = [&](int k) { return bounds[k] - normals.row(k).dot(x); };
  const int max_outer = 4 * (m + n) + 16;

  for (int outer = 0; outer < max_outer; ++outer) {
    int p = -1;
    double worst = -tol;
    for (int k = 0; k < m; ++k) {
      const double s = slack(k);
      if (s < worst) {
        worst = s;
        p = k;
      }
    }
    if (p < 0) return x;

    const Vector np = -normals.row(p).transpose();
    double up = 0.0;
    for (int inner = 0; inner < 4 * n + 16; ++inner) {
      const Vector d = f.J.transpose() * np;
      const int q = f.q;
      const Vector z = f.J.rightCols(n - q) * d.tail(n - q);
      Vector r = Vector::Zero(q);
      if (q > 0) {
        r = f.R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
      }
      double t1 = kInf;
      int drop = -1;
      for (int k = 0; k < q; ++k) {
        if (r[k] > 0.0 && u[static_cast<std::size_t>(k)] / r[k] < t1) {
          t1 = u[static_cast<std::size_t>(k)] / r[k];
          drop = k;
        }
      }
      const double zn = z.dot(np);
      const double t2 = z.norm() > 1e-14 * std::max(1.0, np.norm()) && zn > 0.0 ? -slack(p) / zn : kInf;
      const double t = std::min(t1, t2);
      if (t == kInf) return std::nullopt;

      if (t2 < kInf) x += t * z;
      for (int k = 0; k < q; ++k) u[static_cast<std::size_t>(k)] -= t * r[k];
      up += t;
      if (t == t2) {
        if (f.add(d)) {
          active.push_back(p);
          u.push_back(up);
        }
        break;
      }
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
      f.remove(drop);
    }
  }
  return std::nullopt;
}

}  // namespace convexreg
