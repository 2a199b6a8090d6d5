#pragma once

#include "convexreg/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace convexreg {

struct Variant {
  enum class Kind { Full, Bounded, Lipschitz, BoundedLipschitz };
  Kind kind = Kind::Full;
  double bound = 0.0;      // B
  double lipschitz = 0.0;  // L

  static Variant full() { return {}; }
  static Variant bounded(double b);
  static Variant lipschitz_with(double l);
  static Variant bounded_lipschitz(double b, double l);

  bool has_bound() const { return kind == Kind::Bounded || kind == Kind::BoundedLipschitz; }
  bool has_lipschitz() const { return kind == Kind::Lipschitz || kind == Kind::BoundedLipschitz; }

  nlohmann::json to_json() const;
  static Variant from_json(const nlohmann::json& j);
};

// Design points closer than 1e-10 (Euclidean) are merged at construction:
// the merged point keeps the first occurrence, its response is the average
// and its weight is the multiplicity.
class RegressionProblem {
public:
  RegressionProblem(PointMatrix design, Vector responses, Variant variant = Variant::full());

  int n() const { return static_cast<int>(design_.rows()); }
  int dim() const { return static_cast<int>(design_.cols()); }
  int observations() const { return static_cast<int>(origin_.size()); }
  const PointMatrix& design() const { return design_; }
  const Vector& responses() const { return responses_; }
  const Vector& weights() const { return weights_; }
  const Variant& variant() const { return variant_; }
  // Merged index of each original observation.
  const std::vector<int>& origin() const { return origin_; }
  // Sum over original observations of (Y - mean of its group)^2.
  double within_group_ss() const { return within_ss_; }

  RegressionProblem with_responses(const Vector& merged_responses) const;
  RegressionProblem with_variant(Variant v) const;

  nlohmann::json to_json() const;
  static RegressionProblem from_json(const nlohmann::json& j);

private:
  RegressionProblem() = default;

  PointMatrix design_;
  Vector responses_;
  Vector weights_;
  Variant variant_;
  std::vector<int> origin_;
  double within_ss_ = 0.0;
  PointMatrix original_design_;
  Vector original_responses_;
};

struct SolverConfig {
  int max_iterations = 50000;
  std::optional<double> eps_primal;  // default 1e-6 * sqrt(n)
  std::optional<double> eps_dual;    // default 1e-6 * sqrt(n)
  double eps_feas = 1e-6;
  double penalty_parameter = 0.1;
  double over_relaxation = 1.5;
  bool polish = true;
  int neighbors = 0;  // working-set seed; 0 picks 2d + 2
  int max_rounds = 50;

  void validate() const;
  double primal_tolerance(int n) const;
  double dual_tolerance(int n) const;

  nlohmann::json to_json() const;
  static SolverConfig from_json(const nlohmann::json& j);
};

struct FitDiagnostics {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;  // sum over observations of (Y - theta)^2
  bool converged = false;
  int rounds = 0;
  bool polished = false;
  double max_violation = 0.0;
};

struct LSEFit {
  Vector theta;
  PointMatrix subgradients;
  FitDiagnostics diagnostics;

  nlohmann::json to_json() const;
  static LSEFit from_json(const nlohmann::json& j);
};

LSEFit fit(const RegressionProblem& problem, const SolverConfig& config = {});

// max_i theta_i + g_i . (x - X_i), clipped to [-B, B] for bounded variants.
double extend(const LSEFit& fit, const RegressionProblem& problem, const Vector& x);
Vector extend(const LSEFit& fit, const RegressionProblem& problem, const PointMatrix& points);

struct KKTReport {
  double max_violation = 0.0;         // pairwise convexity
  double max_bound_violation = 0.0;   // |theta_i| - B, or |g_i| - L
  double projection_statistic = 0.0;  // max over probes of <Y - theta, theta' - theta>_w
  int probes = 0;
};

// Probes are feasible fitted-value vectors: fits to perturbed responses and
// random convex combinations of those.
KKTReport check_kkt(const LSEFit& fit, const RegressionProblem& problem, int probes, std::uint64_t seed,
                    const SolverConfig& config = {});

}  // namespace convexreg
