#include "convexreg/complexity.hpp"

#include "convexreg/seeding.hpp"
#include "working_set.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <random>

namespace convexreg {

namespace {

double single_point_sup(double f, double t, double xi, const Variant& v) {
  double hi = f + t;
  double lo = f - t;
  if (v.has_bound()) {
    hi = std::min(hi, v.bound);
    lo = std::max(lo, -v.bound);
  }
  if (hi < lo) return 0.0;
  return std::max(xi * (hi - f), xi * (lo - f));
}

void finish(ComplexityEstimate& e) {
  const std::size_t m = e.t_grid.size();
  std::size_t best = 0;
  for (std::size_t k = 1; k < m; ++k) {
    if (e.H[k].mean > e.H[best].mean) best = k;
  }
  const double threshold = e.H[best].mean - e.H[best].std_error;
  std::size_t first = best;
  std::size_t last = best;
  for (std::size_t k = 0; k < m; ++k) {
    if (e.H[k].mean >= threshold) {
      first = std::min(first, k);
      last = std::max(last, k);
    }
  }
  e.t_star = e.t_grid[first];
  e.flat_lower = e.t_grid[first];
  e.flat_upper = e.t_grid[last];
  e.beyond_grid = m > 1 && best == m - 1;
  e.upper_bracket.reset();
  for (std::size_t k = 0; k < m; ++k) {
    if (e.t_grid[k] > 0.0 && e.H[k].mean <= 0.0) {
      e.upper_bracket = e.t_grid[k];
      break;
    }
  }
}

}  // namespace

std::vector<LocalizedSup> localized_sup_path(const PointMatrix& design, const Vector& center,
                                             const std::vector<double>& radii, const Vector& noise,
                                             const Variant& variant, const SolverConfig& config) {
  const int n = static_cast<int>(design.rows());
  require(n >= 1, "localized supremum needs at least one design point");
  require(center.size() == n && noise.size() == n, "center and noise lengths must match the design");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    require(radii[k] >= 0.0, "radius t must be nonnegative");
    require(k == 0 || radii[k] >= radii[k - 1], "radii must be nondecreasing");
  }
  config.validate();
  std::vector<LocalizedSup> out(radii.size());
  if (n == 1) {
    for (std::size_t k = 0; k < radii.size(); ++k) out[k].value = single_point_sup(center[0], radii[k], noise[0], variant);
    return out;
  }
  if (noise.isZero(0.0)) return out;

  detail::WorkingSetOptions opts;
  opts.neighbors = config.neighbors;
  opts.max_rounds = config.max_rounds;
  opts.eps_feas = config.eps_feas;
  detail::WorkingSet ws(design, opts);

  SplittingProblem p;
  p.design = &design;
  p.weights = Vector::Zero(n);
  p.linear = -noise;
  if (variant.has_bound()) {
    for (int i = 0; i < n; ++i) p.boxes.push_back({i, -variant.bound, variant.bound});
  }
  if (variant.has_lipschitz()) p.gradient_radius = variant.lipschitz;
  p.value_ball = ValueBall{center, 0.0};

  SplittingSettings settings;
  settings.max_iterations = config.max_iterations;
  settings.eps_primal = config.primal_tolerance(n);
  settings.eps_dual = config.dual_tolerance(n);
  settings.rho = config.penalty_parameter;
  settings.alpha = config.over_relaxation;

  std::optional<SplittingState> warm;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (radii[k] == 0.0) continue;
    p.value_ball->radius = radii[k] * std::sqrt(static_cast<double>(n));
    const auto outcome = ws.solve(p, settings, warm ? &*warm : nullptr);
    const Vector& z = outcome.result.state.ball_z;
    out[k].value = noise.dot(z - center) / n;
    out[k].converged = outcome.result.converged && outcome.complete;
    out[k].iterations = outcome.result.iterations;
    settings.rho = outcome.result.rho;
    warm = outcome.result.state;
  }
  return out;
}

LocalizedSup localized_sup(const PointMatrix& design, const Vector& center, double t, const Vector& noise,
                           const Variant& variant, const SolverConfig& config) {
  return localized_sup_path(design, center, {t}, noise, variant, config).front();
}

std::vector<HEstimate> estimate_H_grid(const PointMatrix& design, const Vector& center,
                                       const std::vector<double>& t_grid, double sigma, int mc_reps,
                                       std::uint64_t seed, const Variant& variant, const SolverConfig& config) {
  require(mc_reps >= 2, "mc_reps must be at least 2");
  require(sigma >= 0.0, "sigma must be nonnegative");
  const int n = static_cast<int>(design.rows());
  require(center.size() == n, "center length must match the design");
  const std::size_t m = t_grid.size();
  std::vector<HEstimate> out(m);
  if (sigma == 0.0) {
    for (std::size_t k = 0; k < m; ++k) out[k].mean = t_grid[k] == 0.0 ? 0.0 : -0.5 * t_grid[k] * t_grid[k];
    return out;
  }

  std::vector<std::vector<LocalizedSup>> runs(static_cast<std::size_t>(mc_reps));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < mc_reps; ++r) {
    try {
      Rng rng(derive_seed({seed, static_cast<std::uint64_t>(r)}));
      std::normal_distribution<double> normal(0.0, sigma);
      Vector xi(n);
      for (int i = 0; i < n; ++i) xi[i] = normal(rng);
      runs[static_cast<std::size_t>(r)] = localized_sup_path(design, center, t_grid, xi, variant, config);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::vector<double> samples(static_cast<std::size_t>(mc_reps));
  for (std::size_t k = 0; k < m; ++k) {
    if (t_grid[k] == 0.0) continue;
    const double penalty = 0.5 * t_grid[k] * t_grid[k];
    int failures = 0;
    for (int r = 0; r < mc_reps; ++r) {
      const LocalizedSup& s = runs[static_cast<std::size_t>(r)][k];
      samples[static_cast<std::size_t>(r)] = s.value - penalty;
      failures += s.converged ? 0 : 1;
    }
    const MeanStderr ms = mean_and_stderr(samples);
    out[k] = {ms.mean, ms.std_error, failures};
  }
  return out;
}

HEstimate estimate_H(const PointMatrix& design, const Vector& center, double t, double sigma, int mc_reps,
                     std::uint64_t seed, const Variant& variant, const SolverConfig& config) {
  require(t >= 0.0, "radius t must be nonnegative");
  return estimate_H_grid(design, center, {t}, sigma, mc_reps, seed, variant, config).front();
}

ComplexityEstimate locate_t_star(const PointMatrix& design, const Vector& center, double sigma,
                                 const std::vector<double>& t_grid, int mc_reps, std::uint64_t seed,
                                 const LocateOptions& options) {
  require(!t_grid.empty(), "t_grid must not be empty");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    require(t_grid[k] >= 0.0, "t_grid must be nonnegative");
    require(k == 0 || t_grid[k] > t_grid[k - 1], "t_grid must be strictly increasing");
  }
  ComplexityEstimate e;
  e.t_grid = t_grid;
  e.mc_reps = mc_reps;
  e.sigma = sigma;
  e.H = estimate_H_grid(design, center, t_grid, sigma, mc_reps, seed, options.variant, options.solver);
  finish(e);

  if (options.refine_points > 0 && t_grid.size() > 1 && !e.beyond_grid) {
    const auto at = static_cast<std::size_t>(std::find(e.t_grid.begin(), e.t_grid.end(), e.t_star) - e.t_grid.begin());
    const double lo = at > 0 ? e.t_grid[at - 1] : 0.5 * e.t_grid[at];
    const double hi = e.t_grid[std::min(at + 1, e.t_grid.size() - 1)];
    std::vector<double> fine;
    for (int k = 1; k <= options.refine_points; ++k) {
      const double t = lo + (hi - lo) * k / (options.refine_points + 1);
      if (std::find(e.t_grid.begin(), e.t_grid.end(), t) == e.t_grid.end()) fine.push_back(t);
    }
    const auto extra = estimate_H_grid(design, center, fine, sigma, mc_reps, seed, options.variant, options.solver);
    std::vector<std::pair<double, HEstimate>> merged;
    for (std::size_t k = 0; k < e.t_grid.size(); ++k) merged.emplace_back(e.t_grid[k], e.H[k]);
    for (std::size_t k = 0; k < fine.size(); ++k) merged.emplace_back(fine[k], extra[k]);
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    e.t_grid.clear();
    e.H.clear();
    for (const auto& [t, h] : merged) {
      e.t_grid.push_back(t);
      e.H.push_back(h);
    }
    finish(e);
  }
  return e;
}

std::vector<double> default_t_grid(int n, int d, double sigma, double range, int points) {
  require(n >= 1 && d >= 1, "n and d must be positive");
  require(points >= 2, "a t-grid needs at least two points");
  const double scale = sigma > 0.0 ? sigma : 1.0;
  double lo = 0.05 * scale * std::pow(static_cast<double>(n), -2.0 / d);
  double hi = 4.0 * range;
  if (!(hi > lo)) hi = std::max(4.0 * scale, 100.0 * lo);
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double ratio = std::log(hi / lo) / (points - 1);
  for (int k = 0; k < points; ++k) grid[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k);
  grid.back() = hi;
  return grid;
}

void ComplexityEstimate::write_csv(std::ostream& os) const {
  os << "t,H_mean,H_stderr,solver_failures\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    os << t_grid[k] << ',' << H[k].mean << ',' << H[k].std_error << ',' << H[k].failures << '\n';
  }
}

}  // namespace convexreg
