#pragma once

#include "convexreg/lse.hpp"
#include "convexreg/types.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace convexreg {

struct LocalizedSup {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

// sup over convex-feasible theta with (1/n)|theta - f|^2 <= t^2 of
// (1/n) xi . (theta - f). `variant` adds the bounded/Lipschitz rows.
LocalizedSup localized_sup(const PointMatrix& design, const Vector& center, double t, const Vector& noise,
                           const Variant& variant = Variant::full(), const SolverConfig& config = {});

// One noise draw, every radius in `radii` (ascending), warm-started along
// the radii.
std::vector<LocalizedSup> localized_sup_path(const PointMatrix& design, const Vector& center,
                                             const std::vector<double>& radii, const Vector& noise,
                                             const Variant& variant = Variant::full(),
                                             const SolverConfig& config = {});

struct HEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int failures = 0;
};

// Replicate r uses noise from derive_seed({seed, r}), so every radius sees
// the same draws.
HEstimate estimate_H(const PointMatrix& design, const Vector& center, double t, double sigma, int mc_reps,
                     std::uint64_t seed, const Variant& variant = Variant::full(), const SolverConfig& config = {});

std::vector<HEstimate> estimate_H_grid(const PointMatrix& design, const Vector& center,
                                       const std::vector<double>& t_grid, double sigma, int mc_reps,
                                       std::uint64_t seed, const Variant& variant = Variant::full(),
                                       const SolverConfig& config = {});

struct ComplexityEstimate {
  std::vector<double> t_grid;
  std::vector<HEstimate> H;
  double t_star = 0.0;
  int mc_reps = 0;
  double sigma = 0.0;
  std::optional<double> upper_bracket;  // first grid radius with H <= 0
  double flat_lower = 0.0;              // radii whose mean is within one
  double flat_upper = 0.0;              // stderr of the maximum
  bool beyond_grid = false;             // H still increasing at the last radius

  void write_csv(std::ostream& os) const;
};

struct LocateOptions {
  int refine_points = 0;  // > 0: re-scan this many radii around the coarse argmax
  Variant variant = Variant::full();
  SolverConfig solver;
};

ComplexityEstimate locate_t_star(const PointMatrix& design, const Vector& center, double sigma,
                                 const std::vector<double>& t_grid, int mc_reps, std::uint64_t seed,
                                 const LocateOptions& options = {});

// Geometric grid of `points` radii over [0.05 sigma n^(-2/d), 4 range].
std::vector<double> default_t_grid(int n, int d, double sigma, double range, int points = 12);

}  // namespace convexreg
