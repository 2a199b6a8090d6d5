#pragma once

// Data-parallel inner loops. Every kernel exists twice with the same
// signature: `serial` is the reference used by the tests, `parallel` is the
// OpenMP version. Each output element is computed by exactly one thread in
// the same arithmetic order as the reference, so the two agree bitwise for
// any thread count.

#include "convexreg/types.hpp"

#include <vector>

namespace convexreg::kernels {

// Caps OpenMP worker threads (<= 0 restores the runtime default).
void set_thread_count(int threads);
int thread_count();

struct PairViolation {
  int i = 0;
  int j = 0;
  double amount = 0.0;  // theta_i + g_i . (x_j - x_i) - theta_j
};

namespace serial {

// out[p] = max_k slopes.row(k) . points.row(p) + intercepts[k]
void max_affine(const PointMatrix& slopes, const Vector& intercepts, const PointMatrix& points,
                Vector& out);
// out[p] = min_k |points.row(p) - anchors.row(k)|^2
void min_sq_distance(const PointMatrix& anchors, const PointMatrix& points, Vector& out);
// Largest pairwise convexity violation over all ordered pairs (0 if none).
double max_pair_violation(const PointMatrix& design, const Vector& theta, const PointMatrix& grads);
// Per row i, the `per_row_cap` largest violations above `tol`; rows in order.
std::vector<PairViolation> scan_violations(const PointMatrix& design, const Vector& theta,
                                           const PointMatrix& grads, double tol, int per_row_cap);
// Indices of the k nearest other points of each row (ties broken by index).
std::vector<std::vector<int>> nearest_neighbors(const PointMatrix& design, int k);

}  // namespace serial

namespace parallel {

void max_affine(const PointMatrix& slopes, const Vector& intercepts, const PointMatrix& points,
                Vector& out);
void min_sq_distance(const PointMatrix& anchors, const PointMatrix& points, Vector& out);
double max_pair_violation(const PointMatrix& design, const Vector& theta, const PointMatrix& grads);
std::vector<PairViolation> scan_violations(const PointMatrix& design, const Vector& theta,
                                           const PointMatrix& grads, double tol, int per_row_cap);
std::vector<std::vector<int>> nearest_neighbors(const PointMatrix& design, int k);

}  // namespace parallel

}  // namespace convexreg::kernels
