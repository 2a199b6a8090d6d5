#pragma once

#include "convexreg/geometry.hpp"
#include "convexreg/types.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace convexreg {

// x -> max_k (slopes.row(k) . x + intercepts[k])
class PiecewiseAffineConvex {
public:
  PiecewiseAffineConvex(PointMatrix slopes, Vector intercepts);

  int dim() const noexcept { return static_cast<int>(slopes_.cols()); }
  int pieces() const noexcept { return static_cast<int>(slopes_.rows()); }
  const PointMatrix& slopes() const noexcept { return slopes_; }
  const Vector& intercepts() const noexcept { return intercepts_; }

  double operator()(const Vector& x) const;
  Vector evaluate(const PointMatrix& points) const;

  nlohmann::json to_json() const;
  static PiecewiseAffineConvex from_json(const nlohmann::json& j);

private:
  PointMatrix slopes_;
  Vector intercepts_;
};

double eval_pwa(const PiecewiseAffineConvex& f, const Vector& x);

// f_0(x) = |x|^2
struct QuadraticReference {
  int dim = 1;
  double operator()(const Vector& x) const { return x.squaredNorm(); }
};

// Upper envelope of the tangent planes of |x|^2 at a set of anchors.
struct TangentEnvelope {
  PiecewiseAffineConvex function;
  PointMatrix anchors;
  double eta = 0.0;
  // Fraction of the domain covered by interior cubes (interior variant only).
  std::optional<double> coverage;
};

PiecewiseAffineConvex tangent_envelope(const PointMatrix& anchors);

// eta = max_side / round(k^(1/d)); anchors are the eta-lattice inside the
// domain, or the corners of intersecting eta-cubes when the lattice has
// fewer than two points.
TangentEnvelope build_f_tilde(const SlabPolytope& poly, int k);

// Same construction with anchors restricted to corners of eta-cubes lying
// inside the domain; reports the covered fraction by Monte Carlo.
TangentEnvelope build_f_tilde_interior(const SlabPolytope& poly, int k, int coverage_samples = 20000,
                                       std::uint64_t seed = 7);

inline const double kBumpCoefficient = 3.0 / (4.0 * std::sqrt(2.0) * std::acos(-1.0) * std::acos(-1.0));

// delta^2 * sum_i cos^3(pi u_i) with u = (x - s) / delta, zero unless every
// |u_i| <= 1/2.
double bump_value(const Vector& s, double delta, const Vector& x);

using Codeword = std::vector<std::uint8_t>;

int hamming_distance(const Codeword& a, const Codeword& b);

// Greedy random code: draw uniform words, keep those at distance >=
// min_hamming from all kept. Throws BudgetExhausted once `attempt_budget`
// (default 1000 * target_count) draws fail to reach target_count.
std::vector<Codeword> varshamov_gilbert(int n, int min_hamming, int target_count, std::uint64_t seed,
                                        std::optional<long> attempt_budget = std::nullopt);

// G_xi(x) = |x|^2 + c * sum_{s : xi_s = 1} bump_value(s, delta, x) over the
// grid points s, one member per codeword.
class BumpPacking {
public:
  BumpPacking(GridDesign grid, std::vector<Codeword> codewords);

  // Grid at resolution delta and a code with pairwise distance >= ceil(n/4).
  static BumpPacking build(const SlabPolytope& poly, double delta, int codeword_count,
                           std::uint64_t seed);

  const GridDesign& grid() const noexcept { return grid_; }
  const std::vector<Codeword>& codewords() const noexcept { return codewords_; }
  int size() const noexcept { return static_cast<int>(codewords_.size()); }
  double coefficient() const noexcept { return kBumpCoefficient; }

  double eval(int member, const Vector& x) const;
  // Closed form (3 d delta^2 / (4 sqrt2 pi^2)) * sqrt(hamming / n).
  double distance(int i, int j) const;
  // The separation every pair of members is guaranteed by the code:
  // 3 d delta^2 / (8 sqrt2 pi^2).
  double separation_bound() const;

private:
  void check_member(int member) const;

  GridDesign grid_;
  std::vector<Codeword> codewords_;
  std::map<std::vector<long>, int> lattice_;
};

double eval_packing_member(const BumpPacking& p, int member, const Vector& x);
double packing_distance(const BumpPacking& p, int i, int j);

}  // namespace convexreg
