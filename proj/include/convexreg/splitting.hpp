#pragma once

// Operator-splitting (ADMM) solver for the fitted-value/subgradient
// programs behind every estimator in this library. Variables are
// z = (theta, g) with theta in R^n and one subgradient g_i in R^d per
// design point. The objective is
//
//     1/2 sum_i w_i theta_i^2 + sum_i q_i theta_i
//
// and the constraint rows are
//
//     pair (i, j):  theta_i + g_i . (x_j - x_i) - theta_j  in (-inf, 0]  or  {0}
//     box i:        theta_i                                in [lo, hi]
//     gradient i:   |g_i|_2 <= L
//     value ball:   |theta - c|_2 <= R
//
// Each iteration solves one linear system in (theta, g). The subgradient
// blocks are eliminated exactly (they are block diagonal), leaving an n x n
// Schur complement on theta that is factored once per penalty value.

#include "convexreg/types.hpp"

#include <optional>
#include <vector>

namespace convexreg {

struct PairConstraint {
  int i = 0;
  int j = 0;
  bool equality = false;
};

struct BoxConstraint {
  int i = 0;
  double lower = 0.0;
  double upper = 0.0;
};

struct ValueBall {
  Vector center;
  double radius = 0.0;
};

struct SplittingProblem {
  const PointMatrix* design = nullptr;
  Vector weights;  // w_i >= 0
  Vector linear;   // q_i
  std::vector<PairConstraint> pairs;
  std::vector<BoxConstraint> boxes;
  std::optional<double> gradient_radius;
  std::optional<ValueBall> value_ball;

  int n() const { return static_cast<int>(design->rows()); }
  int dim() const { return static_cast<int>(design->cols()); }
};

struct SplittingSettings {
  int max_iterations = 50000;
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.5;
  int adapt_interval = 50;
  int check_interval = 5;
};

// Primal iterate plus the split copies and scaled-free duals of each row
// block. Doubles as a warm start.
struct SplittingState {
  Vector theta;
  PointMatrix grads;
  Vector pair_z, pair_y;
  Vector box_z, box_y;
  PointMatrix grad_z, grad_y;
  Vector ball_z, ball_y;
};

struct SplittingResult {
  SplittingState state;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double rho = 0.0;
  int factorizations = 0;
  bool converged = false;
  double complementarity = 0.0;  // lambda^T s; interior solver only
};

SplittingResult solve_splitting(const SplittingProblem& problem, const SplittingSettings& settings,
                                const SplittingState* warm = nullptr);

struct InteriorSettings {
  int max_iterations = 200;
  double tolerance = 1e-10;  // on residuals and mean complementarity, relative to max |q_i|
  double acceptable = 1e-7;  // converged anyway when progress stalls below this
  int stall_iterations = 5;
  double regularization = 1e-9;
};

// Mehrotra predictor-corrector on the same rows (inequality pairs and boxes
// only). Each Newton step reuses the Schur elimination of the subgradient
// blocks. Pair duals come back in pair_y and slacks as -pair_z, so the
// result reads like a splitting state.
SplittingResult solve_interior(const SplittingProblem& problem, const InteriorSettings& settings = {},
                               const SplittingState* warm = nullptr);

}  // namespace convexreg
