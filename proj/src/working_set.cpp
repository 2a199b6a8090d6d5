#include "working_set.hpp"

#include "convexreg/kernels.hpp"

#include <algorithm>

namespace convexreg::detail {


WorkingSet::WorkingSet(const PointMatrix& design, const WorkingSetOptions& options)
    : design_(design), options_(options) {
  const int n = static_cast<int>(design.rows());
  std::vector<std::pair<int, int>> initial;
  if (n < options.all_pairs_below) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) initial.emplace_back(i, j);
      }
    }
  } else {
    const int k = std::min(n - 1, options.neighbors > 0 ? options.neighbors
                                                        : 2 * static_cast<int>(design.cols()) + 2);
    const auto nn = kernels::parallel::nearest_neighbors(design, k);
    for (int i = 0; i < n; ++i) {
      for (int j : nn[static_cast<std::size_t>(i)]) {
        initial.emplace_back(i, j);
        initial.emplace_back(j, i);
      }
    }
  }
  add(initial);
}

int WorkingSet::add(const std::vector<std::pair<int, int>>& candidates) {
  int added = 0;
  for (const auto& c : candidates) {
    if (c.first == c.second) continue;
    if (seen_.insert(c).second) {
      pairs_.push_back({c.first, c.second, false});
      ++added;
    }
  }
  return added;
}

WorkingSetOutcome WorkingSet::solve(SplittingProblem problem, const SplittingSettings& settings,
                                    const SplittingState* warm) {
  WorkingSetOutcome out;
  SplittingState state;
  const SplittingState* start = warm;
  int iterations = 0;
  SplittingSettings current = settings;
  for (out.rounds = 1; out.rounds <= options_.max_rounds; ++out.rounds) {
    problem.pairs = pairs_;
    if (options_.interior) {
      InteriorSettings ipm;
      ipm.max_iterations = std::min(ipm.max_iterations, current.max_iterations);
      out.result = solve_interior(problem, ipm, start);
    } else {
      out.result = solve_splitting(problem, current, start);
    }
    if (!options_.interior) current.rho = out.result.rho;
    iterations += out.result.iterations;
    const auto& s = out.result.state;
    const auto found = kernels::parallel::scan_violations(design_, s.theta, s.grads, options_.eps_feas,
                                                          options_.per_row_cap);
    std::vector<std::pair<int, int>> fresh;
    fresh.reserve(found.size());
    for (const auto& v : found) fresh.emplace_back(v.i, v.j);
    if (add(fresh) == 0) {
      out.complete = true;
      break;
    }
    state = out.result.state;
    start = &state;
  }
  out.rounds = std::min(out.rounds, options_.max_rounds);
  out.result.iterations = iterations;
  out.max_violation = kernels::parallel::max_pair_violation(design_, out.result.state.theta,
                                                            out.result.state.grads);
  return out;
}

}  // namespace convexreg::detail
