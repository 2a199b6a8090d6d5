#include "convexreg/lse.hpp"
#include "convexreg/seeding.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace convexreg;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

PointMatrix column(std::initializer_list<double> v) {
  const Vector c = vec(v);
  PointMatrix m(c.size(), 1);
  m.col(0) = c;
  return m;
}

struct Instance {
  PointMatrix x;
  Vector y;
};

// Convex truth plus noise on uniform points.
Instance random_instance(int n, int d, double sigma, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, sigma);
  Instance in{PointMatrix(n, d), Vector(n)};
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) in.x(i, c) = u(rng);
    in.y[i] = in.x.row(i).squaredNorm() + noise(rng);
  }
  return in;
}

double max_violation(const LSEFit& f, const RegressionProblem& p) {
  double worst = 0.0;
  const PointMatrix& x = p.design();
  for (int i = 0; i < p.n(); ++i)
    for (int j = 0; j < p.n(); ++j)
      if (i != j) worst = std::max(worst, f.theta[i] + f.subgradients.row(i).dot(x.row(j) - x.row(i)) - f.theta[j]);
  return worst;
}

}  // namespace

TEST_CASE("V example projects onto the flat line") {
  const RegressionProblem p(column({0, 1, 2}), vec({0, 1, 0}));
  const LSEFit f = fit(p);
  CHECK(f.diagnostics.converged);
  for (int i = 0; i < 3; ++i) CHECK(f.theta[i] == doctest::Approx(1.0 / 3).epsilon(1e-6));
  CHECK(f.diagnostics.objective == doctest::Approx(2.0 / 3).epsilon(1e-6));
}

TEST_CASE("feasible responses are their own projection") {
  const LSEFit f = fit(RegressionProblem(column({0, 1, 2}), vec({0, 0, 1})));
  CHECK((f.theta - vec({0, 0, 1})).norm() <= 1e-6);

  Rng rng(1);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 5; ++t) {
    const Vector y = vec({n01(rng), n01(rng)});
    const LSEFit g = fit(RegressionProblem(column({0.2, 0.9}), y));
    CHECK((g.theta - y).norm() <= 1e-6);
    CHECK(g.diagnostics.objective <= 1e-10);
  }
}

TEST_CASE("bounded and zero-Lipschitz variants") {
  const LSEFit b = fit(RegressionProblem(column({0, 1}), vec({1, 1}), Variant::bounded(0.2)));
  CHECK(b.theta[0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(b.theta[1] == doctest::Approx(0.2).epsilon(1e-6));

  const Vector y = vec({0.3, -1.0, 2.0, 0.5});
  const LSEFit l = fit(RegressionProblem(column({0, 0.3, 0.5, 1}), y, Variant::lipschitz_with(0.0)));
  for (int i = 0; i < 4; ++i) CHECK(l.theta[i] == doctest::Approx(y.mean()).epsilon(1e-6));
}

TEST_CASE("problem validation and duplicate merging") {
  CHECK_THROWS_AS(RegressionProblem(PointMatrix(0, 1), Vector(0)), PreconditionError);
  CHECK_THROWS_AS(RegressionProblem(column({0, 1}), vec({1})), PreconditionError);
  CHECK_THROWS_AS(Variant::bounded(0.0), PreconditionError);
  CHECK_THROWS_AS(Variant::lipschitz_with(-1.0), PreconditionError);

  const RegressionProblem p(column({0, 1, 1 + 1e-12, 2}), vec({0, 1, 3, 0}));
  CHECK(p.n() == 3);
  CHECK(p.observations() == 4);
  CHECK(p.responses()[1] == doctest::Approx(2.0));
  CHECK(p.weights()[1] == 2.0);
  CHECK(p.within_group_ss() == doctest::Approx(2.0));
  const LSEFit f = fit(p);
  // weighted V example: (0, 2, 0) with weights (1, 2, 1) -> constant 1
  for (int i = 0; i < 3; ++i) CHECK(f.theta[i] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(f.diagnostics.objective == doctest::Approx(1 + 0 + 4 + 1).epsilon(1e-6));
}

TEST_CASE("config validation and JSON") {
  SolverConfig c;
  c.eps_feas = 0.0;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = SolverConfig{};
  c.eps_primal = -1.0;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  CHECK(SolverConfig{}.primal_tolerance(100) == doctest::Approx(1e-5));

  SolverConfig d;
  d.max_iterations = 123;
  d.eps_dual = 1e-4;
  const SolverConfig e = SolverConfig::from_json(d.to_json());
  CHECK(e.max_iterations == 123);
  CHECK(*e.eps_dual == 1e-4);
  CHECK_FALSE(e.eps_primal.has_value());

  const RegressionProblem p(column({0, 1, 2}), vec({0, 1, 0}), Variant::bounded_lipschitz(2.0, 3.0));
  const RegressionProblem q = RegressionProblem::from_json(p.to_json());
  CHECK(q.design() == p.design());
  CHECK(q.responses() == p.responses());
  CHECK(q.variant().bound == 2.0);
  CHECK(q.variant().lipschitz == 3.0);
  CHECK(p.to_json()["variant"]["type"] == "bounded_lipschitz");
  CHECK_THROWS_AS(Variant::from_json({{"type", "cubic"}}), PreconditionError);
}

TEST_CASE("fit JSON round trip") {
  const LSEFit f = fit(RegressionProblem(column({0, 1, 2}), vec({0, 1, 0})));
  const LSEFit g = LSEFit::from_json(f.to_json());
  CHECK(g.theta == f.theta);
  CHECK(g.subgradients == f.subgradients);
  CHECK(g.diagnostics.iterations == f.diagnostics.iterations);
  CHECK(f.to_json().contains("g"));
}

TEST_CASE("extend") {
  const RegressionProblem p(column({0, 1, 2}), vec({0, 0, 1}));
  LSEFit f;
  f.theta = vec({0, 0, 1});
  f.subgradients = column({0, 0, 1});
  CHECK(extend(f, p, vec({3.0})) == doctest::Approx(2.0));

  Rng rng(6);
  const Instance in = random_instance(40, 2, 0.1, rng);
  const RegressionProblem q(in.x, in.y);
  const LSEFit h = fit(q);
  for (int i = 0; i < q.n(); ++i) {
    CHECK(std::abs(extend(h, q, Vector(q.design().row(i).transpose())) - h.theta[i]) <= 1e-6);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointMatrix pts(300, 2);
  for (int r = 0; r < 300; ++r) pts.row(r) << u(rng), u(rng);
  const Vector batch = extend(h, q, pts);
  for (int r = 0; r < 100; ++r) {
    const Vector a = pts.row(r).transpose(), b = pts.row(r + 100).transpose();
    const double lam = u(rng);
    CHECK(extend(h, q, Vector(lam * a + (1 - lam) * b)) <= lam * batch[r] + (1 - lam) * batch[r + 100] + 1e-12);
    CHECK(batch[r] == doctest::Approx(extend(h, q, a)).epsilon(1e-14));
  }

  const RegressionProblem bounded(column({0, 1}), vec({1, 1}), Variant::bounded(0.2));
  LSEFit c;
  c.theta = vec({0.2, 0.2});
  c.subgradients = column({1.0, 1.0});
  CHECK(extend(c, bounded, vec({5.0})) == 0.2);
}

TEST_CASE("fits are feasible for every variant") {
  Rng rng(21);
  for (int d = 1; d <= 3; ++d) {
    const Instance in = random_instance(60, d, 0.3, rng);
    for (const Variant& v : {Variant::full(), Variant::bounded(0.5), Variant::lipschitz_with(1.0),
                             Variant::bounded_lipschitz(0.5, 1.0)}) {
      const RegressionProblem p(in.x, in.y, v);
      const LSEFit f = fit(p);
      CHECK(f.diagnostics.converged);
      CHECK(max_violation(f, p) <= 1e-6);
      CHECK(f.diagnostics.max_violation <= 1e-6);
      if (v.has_bound()) CHECK(f.theta.cwiseAbs().maxCoeff() <= 0.5 + 1e-6);
      if (v.has_lipschitz()) CHECK(f.subgradients.rowwise().norm().maxCoeff() <= 1.0 + 1e-6);
    }
  }
}

TEST_CASE("brute force active set agreement for d=1, n <= 4") {
  Rng rng(33);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int n = 1; n <= 4; ++n) {
    for (int t = 0; t < 40; ++t) {
      Vector xs(n), y(n);
      for (int i = 0; i < n; ++i) {
        xs[i] = u(rng);
        y[i] = n01(rng);
      }
      PointMatrix x(n, 1);
      x.col(0) = xs;
      const bool bounded = t % 2 == 1;
      const RegressionProblem p(x, y, bounded ? Variant::bounded(0.5) : Variant::full());
      const LSEFit f = fit(p);
      const Vector expected = oracle::brute_force_1d(xs, y, bounded ? 0.5 : -1.0);
      CHECK((f.theta - expected).cwiseAbs().maxCoeff() <= 1e-6);
      ++checked;
    }
  }
  CHECK(checked == 160);
}

TEST_CASE("projection is 1-Lipschitz in the responses") {
  Rng rng(44);
  std::normal_distribution<double> n01;
  for (int d : {1, 2}) {
    const Instance in = random_instance(50, d, 0.5, rng);
    for (int t = 0; t < 4; ++t) {
      Vector y2 = in.y;
      for (int i = 0; i < y2.size(); ++i) y2[i] += 0.3 * n01(rng);
      const LSEFit a = fit(RegressionProblem(in.x, in.y));
      const LSEFit b = fit(RegressionProblem(in.x, y2));
      CHECK((a.theta - b.theta).norm() <= (in.y - y2).norm() + 1e-6);
    }
  }
}

TEST_CASE("shrinking the class cannot lower the objective") {
  Rng rng(55);
  for (int d : {1, 2}) {
    const Instance in = random_instance(60, d, 0.5, rng);
    const double full = fit(RegressionProblem(in.x, in.y)).diagnostics.objective;
    const double lip = fit(RegressionProblem(in.x, in.y, Variant::lipschitz_with(1.5))).diagnostics.objective;
    const double both =
        fit(RegressionProblem(in.x, in.y, Variant::bounded_lipschitz(0.6, 1.5))).diagnostics.objective;
    const double bounded = fit(RegressionProblem(in.x, in.y, Variant::bounded(0.6))).diagnostics.objective;
    const double slack = 1e-6 * (1.0 + full);
    CHECK(full <= lip + slack);
    CHECK(lip <= both + slack);
    CHECK(full <= bounded + slack);
    CHECK(bounded <= both + slack);
  }
}

TEST_CASE("affine responses are reproduced exactly") {
  Rng rng(66);
  for (int d = 1; d <= 3; ++d) {
    const Instance in = random_instance(80, d, 0.0, rng);
    const Vector w = Vector::LinSpaced(d, -1.0, 2.0);
    const Vector y = in.x * w + Vector::Constant(80, 0.7);
    const LSEFit f = fit(RegressionProblem(in.x, y));
    CHECK((f.theta - y).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(f.diagnostics.objective <= 1e-10);
  }
}

TEST_CASE("scaling the responses scales the fit") {
  Rng rng(77);
  const Instance in = random_instance(60, 2, 0.4, rng);
  const LSEFit a = fit(RegressionProblem(in.x, in.y));
  for (double c : {2.0, 3.0, 0.25}) {
    const LSEFit b = fit(RegressionProblem(in.x, c * in.y));
    CHECK((b.theta - c * a.theta).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, c));
  }
}

TEST_CASE("fit is deterministic") {
  Rng rng(88);
  const Instance in = random_instance(70, 2, 0.4, rng);
  const LSEFit a = fit(RegressionProblem(in.x, in.y));
  const LSEFit b = fit(RegressionProblem(in.x, in.y));
  CHECK(a.theta == b.theta);
  CHECK(a.subgradients == b.subgradients);
}

TEST_CASE("check_kkt") {
  const RegressionProblem v(column({0, 1, 2}), vec({0, 1, 0}));
  const LSEFit f = fit(v);
  const Vector resid = v.responses() - f.theta;
  CHECK(resid.dot(Vector::Zero(3) - f.theta) == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  const KKTReport r = check_kkt(f, v, 50, 1);
  CHECK(r.probes == 50);
  CHECK(r.projection_statistic <= 1e-6 * 3);

  const RegressionProblem interior(column({0, 1, 2}), vec({0, 0, 1}));
  CHECK(check_kkt(fit(interior), interior, 20, 2).projection_statistic <= 1e-6 * 3);

  // an infeasible point is caught
  LSEFit bad = f;
  bad.theta = vec({0, 1, 0});
  bad.subgradients = column({1, 0, -1});
  CHECK(check_kkt(bad, v, 5, 3).max_violation >= 0.5);

  // a feasible but non-optimal point fails the projection test
  LSEFit off = f;
  off.theta = vec({0, 0, 0});
  off.subgradients = column({0, 0, 0});
  CHECK(check_kkt(off, v, 50, 4).projection_statistic > 1e-3);

  Rng rng(101);
  for (int t = 0; t < 6; ++t) {
    const int d = 1 + t % 3;
    const Instance in = random_instance(40 + 10 * t, d, 0.3, rng);
    const RegressionProblem p(in.x, in.y);
    const LSEFit g = fit(p);
    REQUIRE(g.diagnostics.converged);
    CHECK(check_kkt(g, p, 100, static_cast<std::uint64_t>(t)).projection_statistic <= 1e-6 * p.n());
  }
}
