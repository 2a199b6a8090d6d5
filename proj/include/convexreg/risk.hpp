#pragma once

#include "convexreg/functions.hpp"
#include "convexreg/geometry.hpp"
#include "convexreg/lse.hpp"
#include "convexreg/seeding.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace convexreg {

using Evaluable = std::function<Vector(const PointMatrix&)>;

enum class DesignKind { Grid, Uniform };

struct TruthSpec {
  enum class Kind { Quadratic, PiecewiseAffine, FTilde, Bump, Affine };
  Kind kind = Kind::Quadratic;
  std::optional<PiecewiseAffineConvex> pwa;
  int k = 0;                   // FTilde: fixed piece budget
  bool k_sqrt_n = false;       // FTilde: k = ceil(sqrt(n)) instead
  std::optional<double> bump_delta;  // Bump: defaults to the design grid step
  int bump_codewords = 4;
  int bump_member = 0;
  std::uint64_t bump_seed = 0;
  Vector affine_w;
  double affine_b = 0.0;

  nlohmann::json to_json() const;
  static TruthSpec from_json(const nlohmann::json& j, int dim);
};

struct ExperimentConfig {
  int dim = 1;
  SlabPolytope domain = SlabPolytope::unit_cube(1);
  DesignKind design_kind = DesignKind::Grid;
  std::vector<int> n_list;
  double sigma = 1.0;
  TruthSpec truth;
  Variant estimator;
  int replicates = 2;
  std::uint64_t seed = 0;
  std::optional<int> mc_integration_points;  // default 50 n
  std::string output_path;
  SolverConfig solver;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// (1/n) sum (f_i - g_i)^2
double empirical_loss(const Vector& f, const Vector& g);

MeanStderr population_loss(const Evaluable& f, const Evaluable& g, const SlabPolytope& poly, int m,
                           std::uint64_t seed);

// l_{P_n} distance from `values` to their least-squares affine fit.
double affine_distance(const PointMatrix& design, const Vector& values);

// The truth evaluated for a design of realized size n.
Evaluable make_truth(const TruthSpec& spec, const SlabPolytope& poly, int n, std::optional<double> grid_delta);

// Design used for target size n (grid: realized count may exceed n).
PointMatrix build_design(const ExperimentConfig& cfg, int n, int replicate, double* grid_delta = nullptr);

struct Replicate {
  double loss = 0.0;
  double lfrak = 0.0;
  bool converged = true;
  int realized_n = 0;
};

Replicate simulate_once(const ExperimentConfig& cfg, int n, int replicate_index);

struct RiskRow {
  int n = 0;  // realized
  double mean_risk = 0.0;
  double std_error = 0.0;
  double mean_lfrak = 0.0;
  int failures = 0;
};

struct RiskCurve {
  std::vector<RiskRow> rows;
  void write_csv(std::ostream& os) const;
  static RiskCurve read_csv(std::istream& is);
};

// `log` receives one line per n when non-null.
RiskCurve run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct RateFit {
  double slope = 0.0;
  double std_error = 0.0;
};

RateFit fit_rate(const RiskCurve& curve);

double worst_case_exponent(int d);  // r_{n,d}
double adaptive_exponent(int d);    // a_{k,n,d} in n
double minimax_exponent(int d);

enum class Regime { WorstCase, Adaptive, Minimax };

struct RateEntry {
  std::string label;
  int dim = 1;
  Regime regime = Regime::WorstCase;
  double theory = 0.0;
  RateFit fitted;
  bool flagged = false;
};

struct RateTable {
  std::vector<RateEntry> entries;
  void write_csv(std::ostream& os) const;
};

struct RegimeDescriptor {
  std::string label;
  int dim = 1;
  Regime regime = Regime::WorstCase;
};

// Flags |fitted - theory| > 2 stderr + 0.15.
RateTable rate_report(const std::vector<RiskCurve>& curves, const std::vector<RegimeDescriptor>& regimes);

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

}  // namespace convexreg
