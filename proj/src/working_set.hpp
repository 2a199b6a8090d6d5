#pragma once

// Cutting-plane driver shared by the estimators and the localized supremum.
// Only a subset of the n(n-1) pairwise rows is handed to the splitting
// solver; after each solve the full set is scanned and violated pairs are
// added until none remain.

#include "convexreg/splitting.hpp"

#include <set>
#include <utility>
#include <vector>

namespace convexreg::detail {

struct WorkingSetOptions {
  int neighbors = 0;       // initial symmetric k-NN pairs; 0 picks 2d + 2
  int per_row_cap = 8;     // violated pairs added per row and round
  int max_rounds = 50;
  int all_pairs_below = 40;  // use every pair outright for n below this
  double eps_feas = 1e-6;
  bool interior = false;  // interior-point rounds instead of splitting
};

struct WorkingSetOutcome {
  SplittingResult result;
  int rounds = 0;
  double max_violation = 0.0;
  bool complete = false;  // final scan found nothing above eps_feas
};

class WorkingSet {
public:
  WorkingSet(const PointMatrix& design, const WorkingSetOptions& options);

  const std::vector<PairConstraint>& pairs() const { return pairs_; }
  // Appends unseen pairs; returns how many were new.
  int add(const std::vector<std::pair<int, int>>& candidates);

  // Solves `problem` (its pairs are replaced by the working set) to a state
  // with no pairwise violation above eps_feas, or until max_rounds.
  WorkingSetOutcome solve(SplittingProblem problem, const SplittingSettings& settings,
                          const SplittingState* warm = nullptr);

private:
  const PointMatrix& design_;
  WorkingSetOptions options_;
  std::vector<PairConstraint> pairs_;
  std::set<std::pair<int, int>> seen_;
};

}  // namespace convexreg::detail
