#include "convexreg/risk.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace convexreg;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.dim = 1;
  c.domain = SlabPolytope::unit_cube(1);
  c.n_list = {16, 32};
  c.sigma = 0.3;
  c.replicates = 3;
  c.seed = 5;
  return c;
}

TruthSpec affine(double w, double b) {
  TruthSpec t;
  t.kind = TruthSpec::Kind::Affine;
  t.affine_w = vec({w});
  t.affine_b = b;
  return t;
}

RiskCurve power_law(double c, double slope) {
  RiskCurve r;
  for (int n : {32, 64, 128, 256, 512}) r.rows.push_back({n, c * std::pow(n, slope), 0.0, 0.0, 0});
  return r;
}

}  // namespace

TEST_CASE("empirical_loss") {
  CHECK(empirical_loss(vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(empirical_loss(vec({1, 1}), vec({0, 0})) == 1.0);
  CHECK(empirical_loss(vec({2, 0}), vec({0, 0})) == 2.0);
  CHECK_THROWS_AS(empirical_loss(vec({1}), vec({1, 2})), PreconditionError);
}

TEST_CASE("population_loss") {
  const SlabPolytope cube = SlabPolytope::unit_cube(1);
  const Evaluable id = [](const PointMatrix& x) -> Vector { return x.col(0); };
  const Evaluable zero = [](const PointMatrix& x) -> Vector { return Vector::Zero(x.rows()); };
  const Evaluable shifted = [](const PointMatrix& x) -> Vector { return x.col(0).array() + 0.5; };

  const MeanStderr same = population_loss(id, id, cube, 100, 1);
  CHECK(same.mean == 0.0);
  CHECK(same.std_error == 0.0);
  const MeanStderr constant = population_loss(shifted, id, cube, 100, 1);
  CHECK(constant.mean == doctest::Approx(0.25));
  CHECK(constant.std_error == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const MeanStderr third = population_loss(id, zero, cube, 100000, 2);
  CHECK(std::abs(third.mean - 1.0 / 3.0) <= 3.0 * third.std_error);
  CHECK(population_loss(id, zero, cube, 1000, 3).mean == population_loss(id, zero, cube, 1000, 3).mean);
  CHECK_THROWS_AS(population_loss(id, zero, cube, 1, 3), PreconditionError);
}

TEST_CASE("affine_distance") {
  PointMatrix x(3, 1);
  x << -1, 0, 1;
  CHECK(affine_distance(x, vec({1, 0, 1})) == doctest::Approx(std::sqrt(2.0) / 3.0));
  CHECK(affine_distance(x, vec({-2, 1, 4})) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(affine_distance(x, vec({-3, 0, -3})) == doctest::Approx(3.0 * std::sqrt(2.0) / 3.0));
  // collinear points in the plane: minimum-norm fit along the line
  PointMatrix line(4, 2);
  line << 0, 0, 1, 1, 2, 2, 3, 3;
  CHECK(affine_distance(line, vec({1, 3, 5, 7})) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  PointMatrix one(1, 2);
  one << 0.3, 0.4;
  CHECK(affine_distance(one, vec({5.0})) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("config validation and JSON diagnostics") {
  ExperimentConfig c = base_config();
  c.validate();
  c.n_list = {32, 16};
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = base_config();
  c.replicates = 1;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = base_config();
  c.sigma = -1.0;
  CHECK_THROWS_AS(c.validate(), PreconditionError);

  const nlohmann::json good = {{"dim", 2},
                               {"design", "uniform"},
                               {"n_list", {20, 40}},
                               {"sigma", 0.5},
                               {"truth", {{"type", "f_tilde"}, {"k_rule", "sqrt_n"}}},
                               {"estimator", {{"type", "bounded"}, {"B", 3.0}}},
                               {"replicates", 4},
                               {"seed", 9},
                               {"mc_integration_points", 500}};
  const ExperimentConfig parsed = ExperimentConfig::from_json(good);
  CHECK(parsed.dim == 2);
  CHECK(parsed.design_kind == DesignKind::Uniform);
  CHECK(parsed.truth.k_sqrt_n);
  CHECK(parsed.estimator.bound == 3.0);
  CHECK(*parsed.mc_integration_points == 500);
  const ExperimentConfig again = ExperimentConfig::from_json(parsed.to_json());
  CHECK(again.n_list == parsed.n_list);
  CHECK(again.seed == 9);

  nlohmann::json missing = good;
  missing.erase("sigma");
  try {
    ExperimentConfig::from_json(missing);
    FAIL("expected a diagnostic");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("sigma") != std::string::npos);
  }
  nlohmann::json wrong = good;
  wrong["n_list"] = "many";
  try {
    ExperimentConfig::from_json(wrong);
    FAIL("expected a diagnostic");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("n_list") != std::string::npos);
  }
  nlohmann::json design = good;
  design["design"] = "hexagonal";
  CHECK_THROWS_AS(ExperimentConfig::from_json(design), PreconditionError);
}

TEST_CASE("noiseless in-class truths are recovered") {
  ExperimentConfig c = base_config();
  c.sigma = 0.0;
  c.truth = affine(2.0, -1.0);
  for (int r = 0; r < 2; ++r) CHECK(simulate_once(c, 32, r).loss <= 1e-12);

  c.truth = TruthSpec{};
  CHECK(simulate_once(c, 32, 0).loss <= 1e-12);

  c.truth.kind = TruthSpec::Kind::FTilde;
  c.truth.k = 4;
  CHECK(simulate_once(c, 16, 0).loss <= 1e-12);

  ExperimentConfig b = base_config();
  b.dim = 2;
  b.domain = SlabPolytope::unit_cube(2);
  b.n_list = {36};
  b.sigma = 0.0;
  b.truth.kind = TruthSpec::Kind::Bump;
  b.truth.bump_member = 1;
  for (int r = 0; r < 2; ++r) CHECK(simulate_once(b, 36, r).loss <= 1e-6);

  ExperimentConfig bounded = base_config();
  bounded.sigma = 0.0;
  bounded.estimator = Variant::bounded_lipschitz(2.0, 3.0);
  CHECK(simulate_once(bounded, 16, 0).loss <= 1e-12);
}

TEST_CASE("simulate_once is deterministic and reports the realized grid size") {
  ExperimentConfig c = base_config();
  c.n_list = {10};
  const Replicate a = simulate_once(c, 10, 1);
  const Replicate b = simulate_once(c, 10, 1);
  CHECK(a.loss == b.loss);
  CHECK(a.lfrak == b.lfrak);
  CHECK(a.realized_n >= 10);
  CHECK_THROWS_AS(simulate_once(c, 11, 0), PreconditionError);
}

TEST_CASE("adding an affine function to data and truth leaves the loss unchanged") {
  // Affine functions are the lineality space of the convex cone, so the
  // projection commutes with the shift.
  PointMatrix slopes(3, 1);
  slopes << -1.0, 0.5, 2.0;
  const Vector intercepts = vec({0.2, -0.1, -1.0});
  ExperimentConfig c = base_config();
  c.n_list = {24};
  c.truth.kind = TruthSpec::Kind::PiecewiseAffine;
  c.truth.pwa = PiecewiseAffineConvex(slopes, intercepts);
  ExperimentConfig shifted = c;
  shifted.truth.pwa = PiecewiseAffineConvex(slopes.array() + 3.0, intercepts.array() - 0.7);
  for (int r = 0; r < 3; ++r) {
    CHECK(simulate_once(c, 24, r).loss == doctest::Approx(simulate_once(shifted, 24, r).loss).epsilon(1e-8));
  }
}

TEST_CASE("the fit is no farther from the truth than the data") {
  for (int d : {1, 2}) {
    const SlabPolytope cube = SlabPolytope::unit_cube(d);
    const GridDesign g = grid_with_at_least(cube, 40);
    const Vector f0 = g.points.rowwise().squaredNorm();
    Rng rng(31 + d);
    std::normal_distribution<double> noise(0.0, 0.5);
    for (int r = 0; r < 3; ++r) {
      Vector y = f0;
      for (int i = 0; i < y.size(); ++i) y[i] += noise(rng);
      const LSEFit f = fit(RegressionProblem(g.points, y));
      const double data = empirical_loss(y, f0);
      CHECK(empirical_loss(f.theta, f0) <= data + 1e-9);
      CHECK(std::sqrt(empirical_loss(f.theta, f0)) <= 2.0 * std::sqrt(data) + 1e-9);
    }
  }
}

TEST_CASE("run_experiment rows, CSV and noiseless affine risk") {
  ExperimentConfig c = base_config();
  c.sigma = 0.0;
  c.replicates = 2;
  c.truth = affine(1.0, 0.5);
  const RiskCurve quiet = run_experiment(c);
  REQUIRE(quiet.rows.size() == 2);
  for (const auto& r : quiet.rows) {
    CHECK(r.mean_risk <= 1e-12);
    CHECK(r.failures == 0);
    CHECK(r.mean_lfrak == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }

  c = base_config();
  c.n_list = {16, 64, 256};
  c.replicates = 6;
  c.truth = TruthSpec{};
  std::ostringstream log;
  const RiskCurve curve = run_experiment(c, &log);
  REQUIRE(curve.rows.size() == 3);
  for (std::size_t k = 0; k < curve.rows.size(); ++k) {
    CHECK(curve.rows[k].mean_risk >= 0.0);
    CHECK(curve.rows[k].mean_lfrak == doctest::Approx(curve.rows[0].mean_lfrak).epsilon(0.05));
    if (k > 0) {
      const double pooled = std::hypot(curve.rows[k].std_error, curve.rows[k - 1].std_error);
      CHECK(curve.rows[k].mean_risk <= curve.rows[k - 1].mean_risk + 2.0 * pooled);
    }
  }
  CHECK(log.str().find("n=16") != std::string::npos);

  std::stringstream csv;
  curve.write_csv(csv);
  CHECK(csv.str().rfind("n,mean_risk,stderr,mean_Lfrak,failures\n", 0) == 0);
  const RiskCurve back = RiskCurve::read_csv(csv);
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[2].mean_risk == curve.rows[2].mean_risk);
  CHECK(back.rows[1].n == curve.rows[1].n);
}

TEST_CASE("uniform design uses the population loss") {
  ExperimentConfig c = base_config();
  c.design_kind = DesignKind::Uniform;
  c.n_list = {30};
  c.mc_integration_points = 2000;
  c.estimator = Variant::bounded(2.0);
  const Replicate a = simulate_once(c, 30, 0);
  CHECK(a.realized_n == 30);
  CHECK(a.loss > 0.0);
  CHECK(a.loss == simulate_once(c, 30, 0).loss);
}

TEST_CASE("fit_rate") {
  const RateFit exact = fit_rate(power_law(7.0, -0.8));
  CHECK(exact.slope == doctest::Approx(-0.8));
  CHECK(exact.std_error == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(fit_rate(power_law(3.0, 0.0)).slope == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  RiskCurve bumped = power_law(1.0, -1.0);
  bumped.rows[2].mean_risk *= 1.01;
  CHECK(std::abs(fit_rate(bumped).slope + 1.0) <= 0.01);
  RiskCurve bad = power_law(1.0, -1.0);
  bad.rows[1].mean_risk = 0.0;
  CHECK_THROWS_AS(fit_rate(bad), PreconditionError);
  RiskCurve short_curve = power_law(1.0, -1.0);
  short_curve.rows.resize(2);
  CHECK_THROWS_AS(fit_rate(short_curve), PreconditionError);
}

TEST_CASE("theoretical exponents") {
  CHECK(worst_case_exponent(1) == doctest::Approx(-0.8));
  CHECK(worst_case_exponent(4) == doctest::Approx(-0.5));
  CHECK(worst_case_exponent(5) == doctest::Approx(-0.4));
  CHECK(worst_case_exponent(8) == doctest::Approx(-0.25));
  CHECK(adaptive_exponent(3) == -1.0);
  CHECK(adaptive_exponent(6) == doctest::Approx(-4.0 / 6.0));
  for (int d = 1; d <= 8; ++d) CHECK(minimax_exponent(d) == doctest::Approx(-4.0 / (d + 4)));
}

TEST_CASE("rate_report flags") {
  const std::vector<RiskCurve> curves = {power_law(1.0, -0.79), power_law(1.0, -1.02), power_law(1.0, -0.5)};
  const std::vector<RegimeDescriptor> regimes = {
      {"quadratic", 1, Regime::WorstCase}, {"affine", 1, Regime::Adaptive}, {"slow", 1, Regime::Adaptive}};
  const RateTable t = rate_report(curves, regimes);
  REQUIRE(t.entries.size() == 3);
  CHECK_FALSE(t.entries[0].flagged);
  CHECK_FALSE(t.entries[1].flagged);
  CHECK(t.entries[2].flagged);
  CHECK(t.entries[0].theory == doctest::Approx(-0.8));
  std::ostringstream csv;
  t.write_csv(csv);
  CHECK(csv.str().rfind("label,d,regime,theory,fitted_slope,fitted_stderr,flagged\n", 0) == 0);
  CHECK(regime_from_string(to_string(Regime::Minimax)) == Regime::Minimax);
  CHECK_THROWS_AS(regime_from_string("fast"), PreconditionError);
  CHECK_THROWS_AS(rate_report(curves, {regimes[0]}), PreconditionError);
}
