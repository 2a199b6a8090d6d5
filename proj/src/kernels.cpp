#include "convexreg/kernels.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace convexreg::kernels {

void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) {
    omp_set_num_threads(threads);
  } else {
    omp_set_num_threads(omp_get_num_procs());
  }
#else
  (void)threads;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// Row-level bodies shared by both variants so the arithmetic is identical.

inline double max_affine_row(const PointMatrix& slopes, const Vector& intercepts,
                             const PointMatrix& points, Eigen::Index p) {
  double best = -std::numeric_limits<double>::infinity();
  const Eigen::Index d = points.cols();
  for (Eigen::Index k = 0; k < slopes.rows(); ++k) {
    double v = intercepts[k];
    for (Eigen::Index c = 0; c < d; ++c) v += slopes(k, c) * points(p, c);
    best = std::max(best, v);
  }
  return best;
}

inline double min_sq_distance_row(const PointMatrix& anchors, const PointMatrix& points,
                                  Eigen::Index p) {
  double best = std::numeric_limits<double>::infinity();
  const Eigen::Index d = points.cols();
  for (Eigen::Index k = 0; k < anchors.rows(); ++k) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double diff = points(p, c) - anchors(k, c);
      s += diff * diff;
    }
    best = std::min(best, s);
  }
  return best;
}

inline double violation(const PointMatrix& x, const Vector& theta, const PointMatrix& g,
                        Eigen::Index i, Eigen::Index j) {
  double v = theta[i] - theta[j];
  for (Eigen::Index c = 0; c < x.cols(); ++c) v += g(i, c) * (x(j, c) - x(i, c));
  return v;
}

inline double row_max_violation(const PointMatrix& x, const Vector& theta, const PointMatrix& g,
                                Eigen::Index i) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    if (j != i) worst = std::max(worst, violation(x, theta, g, i, j));
  }
  return worst;
}

std::vector<PairViolation> row_violations(const PointMatrix& x, const Vector& theta,
                                          const PointMatrix& g, double tol, int cap,
                                          Eigen::Index i) {
  std::vector<PairViolation> found;
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    if (j == i) continue;
    const double v = violation(x, theta, g, i, j);
    if (v > tol) found.push_back({static_cast<int>(i), static_cast<int>(j), v});
  }
  auto by_amount = [](const PairViolation& a, const PairViolation& b) {
    return a.amount != b.amount ? a.amount > b.amount : a.j < b.j;
  };
  if (cap > 0 && static_cast<int>(found.size()) > cap) {
    std::partial_sort(found.begin(), found.begin() + cap, found.end(), by_amount);
    found.resize(static_cast<std::size_t>(cap));
  } else {
    std::sort(found.begin(), found.end(), by_amount);
  }
  return found;
}

std::vector<int> row_neighbors(const PointMatrix& x, int k, Eigen::Index i) {
  std::vector<std::pair<double, int>> dist;
  dist.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    if (j == i) continue;
    dist.emplace_back((x.row(j) - x.row(i)).squaredNorm(), static_cast<int>(j));
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
  std::vector<int> out(take);
  for (std::size_t q = 0; q < take; ++q) out[q] = dist[q].second;
  return out;
}

std::vector<PairViolation> flatten(std::vector<std::vector<PairViolation>>& rows) {
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  std::vector<PairViolation> out;
  out.reserve(total);
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace

namespace serial {

void max_affine(const PointMatrix& slopes, const Vector& intercepts, const PointMatrix& points,
                Vector& out) {
  out.resize(points.rows());
  for (Eigen::Index p = 0; p < points.rows(); ++p) out[p] = max_affine_row(slopes, intercepts, points, p);
}

void min_sq_distance(const PointMatrix& anchors, const PointMatrix& points, Vector& out) {
  out.resize(points.rows());
  for (Eigen::Index p = 0; p < points.rows(); ++p) out[p] = min_sq_distance_row(anchors, points, p);
}

double max_pair_violation(const PointMatrix& design, const Vector& theta, const PointMatrix& grads) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    worst = std::max(worst, row_max_violation(design, theta, grads, i));
  }
  return worst;
}

std::vector<PairViolation> scan_violations(const PointMatrix& design, const Vector& theta,
                                           const PointMatrix& grads, double tol, int per_row_cap) {
  std::vector<std::vector<PairViolation>> rows(static_cast<std::size_t>(design.rows()));
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    rows[static_cast<std::size_t>(i)] = row_violations(design, theta, grads, tol, per_row_cap, i);
  }
  return flatten(rows);
}

std::vector<std::vector<int>> nearest_neighbors(const PointMatrix& design, int k) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(design.rows()));
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = row_neighbors(design, k, i);
  }
  return out;
}

}  // namespace serial

namespace parallel {

void max_affine(const PointMatrix& slopes, const Vector& intercepts, const PointMatrix& points,
                Vector& out) {
  out.resize(points.rows());
  const Eigen::Index n = points.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index p = 0; p < n; ++p) out[p] = max_affine_row(slopes, intercepts, points, p);
}

void min_sq_distance(const PointMatrix& anchors, const PointMatrix& points, Vector& out) {
  out.resize(points.rows());
  const Eigen::Index n = points.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index p = 0; p < n; ++p) out[p] = min_sq_distance_row(anchors, points, p);
}

double max_pair_violation(const PointMatrix& design, const Vector& theta, const PointMatrix& grads) {
  const Eigen::Index n = design.rows();
  double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (Eigen::Index i = 0; i < n; ++i) {
    worst = std::max(worst, row_max_violation(design, theta, grads, i));
  }
  return worst;
}

std::vector<PairViolation> scan_violations(const PointMatrix& design, const Vector& theta,
                                           const PointMatrix& grads, double tol, int per_row_cap) {
  const Eigen::Index n = design.rows();
  std::vector<std::vector<PairViolation>> rows(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    rows[static_cast<std::size_t>(i)] = row_violations(design, theta, grads, tol, per_row_cap, i);
  }
  return flatten(rows);
}

std::vector<std::vector<int>> nearest_neighbors(const PointMatrix& design, int k) {
  const Eigen::Index n = design.rows();
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = row_neighbors(design, k, i);
  return out;
}

}  // namespace parallel

}  // namespace convexreg::kernels
