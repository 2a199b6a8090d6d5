#pragma once

#include "convexreg/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace convexreg {

// {x : lower <= normal . x <= upper}
struct Slab {
  Vector normal;
  double lower = 0.0;
  double upper = 0.0;
};

// Bounded intersection of slabs, contained in the origin-centred ball of
// `radius`. Immutable after construction.
class SlabPolytope {
public:
  static constexpr double kTolerance = 1e-12;

  SlabPolytope(int dim, std::vector<Slab> slabs, double radius);

  // [0,1]^d with radius sqrt(d).
  static SlabPolytope unit_cube(int dim);
  static SlabPolytope box(const Vector& lower, const Vector& upper);
  // Regular polygon with `sides` slab pairs circumscribing the disc of
  // radius `inradius` centred at the origin.
  static SlabPolytope regular_polygon(int slab_pairs, double inradius);

  int dim() const noexcept { return dim_; }
  double radius() const noexcept { return radius_; }
  const std::vector<Slab>& slabs() const noexcept { return slabs_; }

  bool contains(const Vector& x) const;

  // Axis-aligned box enclosing the polytope. Exact when the vertices could
  // be enumerated, otherwise the radius box cut by axis-aligned slabs.
  const Vector& box_lower() const noexcept { return box_lower_; }
  const Vector& box_upper() const noexcept { return box_upper_; }
  double max_side() const;

  // Empty when the slab count made enumeration too expensive.
  const PointMatrix& vertices() const noexcept { return vertices_; }

  nlohmann::json to_json() const;
  static SlabPolytope from_json(const nlohmann::json& j);

private:
  int dim_;
  std::vector<Slab> slabs_;
  double radius_;
  Vector box_lower_;
  Vector box_upper_;
  PointMatrix vertices_;
};

bool contains(const SlabPolytope& poly, const Vector& x);

// Raised when a grid resolution yields fewer than two design points.
class GridTooCoarse : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

struct GridDesign {
  double delta = 0.0;
  PointMatrix points;
  std::vector<std::vector<long>> indices;  // integer lattice coordinates
  int n() const noexcept { return static_cast<int>(points.rows()); }
};

// Lattice points {k * delta : k in Z^d} inside `poly`, lexicographic in k.
GridDesign grid_points(const SlabPolytope& poly, double delta);

// Largest delta of the form max_side / m whose grid holds at least
// `target_n` points.
GridDesign grid_with_at_least(const SlabPolytope& poly, int target_n);

struct RandomDesign {
  PointMatrix points;
  std::uint64_t seed = 0;
  int n() const noexcept { return static_cast<int>(points.rows()); }
};

// Uniform i.i.d. points by rejection from the bounding box. Throws
// BudgetExhausted after `max_attempts` proposals (default 1000 * n).
RandomDesign sample_uniform(const SlabPolytope& poly, int n, std::uint64_t seed,
                            std::optional<long> max_attempts = std::nullopt);

enum class CoverMode { Intersecting, Interior };

struct AxisCube {
  std::vector<long> index;  // cube is prod [k_i eta, (k_i + 1) eta]
  double eta = 0.0;
  Vector lower() const;
  Vector upper() const;
};

// Intersecting: cubes whose interior meets the polytope (a superset in d>=3,
// never missing a cube that does). Interior: cubes contained in it.
std::vector<AxisCube> cube_cover(const SlabPolytope& poly, double eta, CoverMode mode);

// Distinct corners of the given cubes.
PointMatrix cube_vertices(const std::vector<AxisCube>& cubes);

}  // namespace convexreg
