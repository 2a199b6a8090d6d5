#include "convexreg/geometry.hpp"

#include <doctest.h>

#include <cmath>

using namespace convexreg;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

SlabPolytope unit_disc_octagon() { return SlabPolytope::regular_polygon(4, 1.0); }

}  // namespace

TEST_CASE("contains on the unit square") {
  const SlabPolytope sq = SlabPolytope::unit_cube(2);
  CHECK(contains(sq, vec({0.5, 0.5})));
  CHECK(contains(sq, vec({1.0, 0.0})));
  CHECK_FALSE(contains(sq, vec({1.1, 0.0})));
  CHECK(contains(sq, vec({1.0 + 5e-13, 0.0})));
  CHECK_THROWS_AS(contains(sq, vec({0.5})), PreconditionError);
}

TEST_CASE("slab polytope rejects bad slabs and unbounded systems") {
  CHECK_THROWS_AS(SlabPolytope(1, {Slab{vec({2.0}), 0.0, 1.0}}, 1.0), PreconditionError);
  CHECK_THROWS_AS(SlabPolytope(1, {Slab{vec({1.0}), 1.0, 0.0}}, 1.0), PreconditionError);
  // a single slab in the plane is unbounded
  CHECK_THROWS_AS(SlabPolytope(2, {Slab{vec({1.0, 0.0}), 0.0, 1.0}}, 5.0), PreconditionError);
  // [0,2] does not fit in the radius-1 ball
  CHECK_THROWS_AS(SlabPolytope(1, {Slab{vec({1.0}), 0.0, 2.0}}, 1.0), PreconditionError);
}

TEST_CASE("polytope JSON round trip") {
  const SlabPolytope p = unit_disc_octagon();
  const SlabPolytope q = SlabPolytope::from_json(p.to_json());
  REQUIRE(q.slabs().size() == p.slabs().size());
  CHECK(q.radius() == p.radius());
  for (std::size_t i = 0; i < p.slabs().size(); ++i) {
    CHECK(q.slabs()[i].normal.isApprox(p.slabs()[i].normal));
    CHECK(q.slabs()[i].lower == p.slabs()[i].lower);
  }
}

TEST_CASE("grid_points enumerations") {
  const GridDesign g1 = grid_points(SlabPolytope::unit_cube(1), 0.3);
  REQUIRE(g1.n() == 4);
  for (int i = 0; i < 4; ++i) CHECK(g1.points(i, 0) == doctest::Approx(0.3 * i));

  CHECK(grid_points(SlabPolytope::unit_cube(2), 0.5).n() == 9);

  const GridDesign g3 = grid_points(SlabPolytope::box(vec({0.1}), vec({1.0})), 0.5);
  REQUIRE(g3.n() == 2);
  CHECK(g3.points(0, 0) == doctest::Approx(0.5));
  CHECK(g3.points(1, 0) == doctest::Approx(1.0));

  CHECK_THROWS_AS(grid_points(SlabPolytope::unit_cube(1), 2.0), GridTooCoarse);
  CHECK_THROWS_AS(grid_points(SlabPolytope::unit_cube(1), 0.0), PreconditionError);
}

TEST_CASE("grid points are lexicographic, on the lattice and inside") {
  const SlabPolytope p = unit_disc_octagon();
  const GridDesign g = grid_points(p, 0.17);
  for (int r = 0; r < g.n(); ++r) {
    CHECK(contains(p, Vector(g.points.row(r).transpose())));
    for (int c = 0; c < 2; ++c) {
      CHECK(std::abs(g.points(r, c) - g.indices[r][c] * g.delta) <= 1e-12);
    }
    if (r > 0) CHECK(g.indices[r - 1] < g.indices[r]);
  }
}

TEST_CASE("grid size obeys the volumetric bounds on the cube") {
  for (int d = 1; d <= 3; ++d) {
    for (double delta : {0.5, 0.3, 0.2, 0.125, 0.07}) {
      const int n = grid_points(SlabPolytope::unit_cube(d), delta).n();
      CHECK(std::pow(1.0 / delta, d) <= n + 1e-9);
      CHECK(n <= std::pow(1.0 / delta + 1.0, d) + 1e-9);
    }
  }
}

TEST_CASE("grid_with_at_least reaches the target") {
  for (int target : {2, 10, 33, 100}) {
    const GridDesign g = grid_with_at_least(SlabPolytope::unit_cube(2), target);
    CHECK(g.n() >= target);
  }
}

TEST_CASE("sample_uniform") {
  const SlabPolytope cube = SlabPolytope::unit_cube(3);
  CHECK_THROWS_AS(sample_uniform(cube, 0, 1), PreconditionError);

  const RandomDesign a = sample_uniform(cube, 10000, 42);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(a.points.col(c).mean() - 0.5) <= 0.02);
  const RandomDesign b = sample_uniform(cube, 10000, 42);
  CHECK(a.points == b.points);

  const SlabPolytope oct = unit_disc_octagon();
  const RandomDesign s = sample_uniform(oct, 2000, 3);
  for (int r = 0; r < s.n(); ++r) CHECK(contains(oct, Vector(s.points.row(r).transpose())));

  CHECK_THROWS_AS(sample_uniform(oct, 100, 3, 10), BudgetExhausted);
}

TEST_CASE("cube_cover examples") {
  const SlabPolytope sq = SlabPolytope::unit_cube(2);
  CHECK(cube_cover(sq, 0.5, CoverMode::Intersecting).size() == 4);
  const auto interior = cube_cover(sq, 0.6, CoverMode::Interior);
  REQUIRE(interior.size() == 1);
  CHECK(interior[0].lower().isZero());
  CHECK(interior[0].upper().isApprox(vec({0.6, 0.6})));

  const auto disc = cube_cover(unit_disc_octagon(), 2.0, CoverMode::Intersecting);
  CHECK(disc.size() >= 1);
  for (const auto& c : disc) CHECK((c.upper() - c.lower()).isApprox(vec({2.0, 2.0})));
  CHECK_THROWS_AS(cube_cover(sq, -1.0, CoverMode::Interior), PreconditionError);
}

TEST_CASE("interior cubes are disjoint and inside") {
  const SlabPolytope p = unit_disc_octagon();
  const auto cubes = cube_cover(p, 0.2, CoverMode::Interior);
  REQUIRE(!cubes.empty());
  for (std::size_t a = 0; a < cubes.size(); ++a) {
    for (std::size_t b = a + 1; b < cubes.size(); ++b) CHECK(cubes[a].index != cubes[b].index);
    const PointMatrix corners = cube_vertices({cubes[a]});
    CHECK(corners.rows() == 4);
    for (int r = 0; r < corners.rows(); ++r) CHECK(contains(p, Vector(corners.row(r).transpose())));
  }
}

TEST_CASE("intersecting cover contains every sampled point") {
  const SlabPolytope p = unit_disc_octagon();
  const double eta = 0.3;
  const auto cubes = cube_cover(p, eta, CoverMode::Intersecting);
  const RandomDesign s = sample_uniform(p, 500, 9);
  for (int r = 0; r < s.n(); ++r) {
    bool covered = false;
    for (const auto& c : cubes) {
      const Vector x = s.points.row(r).transpose();
      if ((x.array() >= c.lower().array() - 1e-12).all() && (x.array() <= c.upper().array() + 1e-12).all()) {
        covered = true;
        break;
      }
    }
    CHECK(covered);
  }
}
