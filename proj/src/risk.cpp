#include "convexreg/risk.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

namespace convexreg {

namespace {

template <class T>
T field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw PreconditionError(std::string("config is missing field \"") + name + "\"");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("config field \"") + name + "\": " + e.what());
  }
}

template <class T>
T field_or(const nlohmann::json& j, const char* name, T fallback) {
  return j.contains(name) ? field<T>(j, name) : fallback;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json TruthSpec::to_json() const {
  switch (kind) {
    case Kind::Quadratic: return {{"type", "quadratic"}};
    case Kind::PiecewiseAffine: {
      nlohmann::json j = pwa->to_json();
      j["type"] = "pwa";
      return j;
    }
    case Kind::FTilde:
      if (k_sqrt_n) return {{"type", "f_tilde"}, {"k_rule", "sqrt_n"}};
      return {{"type", "f_tilde"}, {"k", k}};
    case Kind::Bump: {
      nlohmann::json j = {{"type", "bump"}, {"codewords", bump_codewords}, {"member", bump_member}, {"seed", bump_seed}};
      if (bump_delta) j["delta"] = *bump_delta;
      return j;
    }
    case Kind::Affine:
      return {{"type", "affine"},
              {"w", std::vector<double>(affine_w.data(), affine_w.data() + affine_w.size())},
              {"b", affine_b}};
  }
  return {};
}

TruthSpec TruthSpec::from_json(const nlohmann::json& j, int dim) {
  TruthSpec t;
  const std::string type = field<std::string>(j, "type");
  if (type == "quadratic") {
    t.kind = Kind::Quadratic;
  } else if (type == "pwa") {
    t.kind = Kind::PiecewiseAffine;
    nlohmann::json body = j;
    if (!body.contains("dim")) body["dim"] = dim;
    t.pwa = PiecewiseAffineConvex::from_json(body);
    require(t.pwa->dim() == dim, "truth.dim does not match config dim");
  } else if (type == "f_tilde") {
    t.kind = Kind::FTilde;
    if (j.contains("k_rule")) {
      const std::string rule = field<std::string>(j, "k_rule");
      require(rule == "sqrt_n", "truth.k_rule must be \"sqrt_n\"");
      t.k_sqrt_n = true;
    } else {
      t.k = field<int>(j, "k");
      require(t.k >= 1, "truth.k must be at least 1");
    }
  } else if (type == "bump") {
    t.kind = Kind::Bump;
    if (j.contains("delta")) t.bump_delta = field<double>(j, "delta");
    t.bump_codewords = field_or<int>(j, "codewords", 4);
    t.bump_member = field_or<int>(j, "member", 0);
    t.bump_seed = field_or<std::uint64_t>(j, "seed", 0);
    require(t.bump_member >= 0 && t.bump_member < t.bump_codewords, "truth.member must index one of the codewords");
  } else if (type == "affine") {
    t.kind = Kind::Affine;
    t.affine_w = to_vector(field_or<std::vector<double>>(j, "w", std::vector<double>(static_cast<std::size_t>(dim), 1.0)));
    t.affine_b = field_or<double>(j, "b", 0.0);
    require(t.affine_w.size() == dim, "truth.w length must equal dim");
  } else {
    throw PreconditionError("truth.type must be one of quadratic, pwa, f_tilde, bump, affine; got \"" + type + "\"");
  }
  return t;
}

void ExperimentConfig::validate() const {
  require(dim >= 1, "dim must be positive");
  require(domain.dim() == dim, "domain dimension does not match dim");
  require(!n_list.empty(), "n_list must not be empty");
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    require(n_list[k] >= 1, "n_list entries must be positive");
    require(k == 0 || n_list[k] > n_list[k - 1], "n_list must be increasing");
  }
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be nonnegative");
  require(replicates >= 2, "replicates must be at least 2");
  require(!mc_integration_points || *mc_integration_points >= 2, "mc_integration_points must be at least 2");
  if (truth.kind == TruthSpec::Kind::Affine) require(truth.affine_w.size() == dim, "truth.w length must equal dim");
  solver.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = {{"dim", dim},
                      {"domain", domain.to_json()},
                      {"design", design_kind == DesignKind::Grid ? "grid" : "uniform"},
                      {"n_list", n_list},
                      {"sigma", sigma},
                      {"truth", truth.to_json()},
                      {"estimator", estimator.to_json()},
                      {"replicates", replicates},
                      {"seed", seed},
                      {"solver", solver.to_json()}};
  if (mc_integration_points) j["mc_integration_points"] = *mc_integration_points;
  if (!output_path.empty()) j["output_path"] = output_path;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), "experiment config must be a JSON object");
  ExperimentConfig c;
  c.dim = field<int>(j, "dim");
  require(c.dim >= 1, "dim must be positive");
  c.domain = j.contains("domain") ? SlabPolytope::from_json(j.at("domain")) : SlabPolytope::unit_cube(c.dim);
  const std::string design = field_or<std::string>(j, "design", "grid");
  if (design == "grid") {
    c.design_kind = DesignKind::Grid;
  } else if (design == "uniform") {
    c.design_kind = DesignKind::Uniform;
  } else {
    throw PreconditionError("config field \"design\" must be \"grid\" or \"uniform\"; got \"" + design + "\"");
  }
  c.n_list = field<std::vector<int>>(j, "n_list");
  c.sigma = field<double>(j, "sigma");
  require(j.contains("truth"), "config is missing field \"truth\"");
  c.truth = TruthSpec::from_json(j.at("truth"), c.dim);
  c.estimator = j.contains("estimator") ? Variant::from_json(j.at("estimator")) : Variant::full();
  c.replicates = field<int>(j, "replicates");
  c.seed = field_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("mc_integration_points")) c.mc_integration_points = field<int>(j, "mc_integration_points");
  c.output_path = field_or<std::string>(j, "output_path", "");
  if (j.contains("solver")) c.solver = SolverConfig::from_json(j.at("solver"));
  c.validate();
  return c;
}

double empirical_loss(const Vector& f, const Vector& g) {
  require(f.size() == g.size(), "loss vectors must have equal lengths");
  require(f.size() > 0, "loss needs at least one value");
  const Vector sq = (f - g).cwiseAbs2();
  return pairwise_sum(std::span<const double>(sq.data(), static_cast<std::size_t>(sq.size()))) / static_cast<double>(sq.size());
}

MeanStderr population_loss(const Evaluable& f, const Evaluable& g, const SlabPolytope& poly, int m,
                           std::uint64_t seed) {
  require(m >= 2, "population loss needs m >= 2 points");
  const RandomDesign sample = sample_uniform(poly, m, seed);
  const Vector sq = (f(sample.points) - g(sample.points)).cwiseAbs2();
  return mean_and_stderr(std::span<const double>(sq.data(), static_cast<std::size_t>(sq.size())));
}

double affine_distance(const PointMatrix& design, const Vector& values) {
  const Eigen::Index n = design.rows();
  require(n >= 1, "affine distance needs at least one point");
  require(values.size() == n, "values must have one entry per design point");
  Matrix a(n, design.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(design.cols()) = design;
  const Vector coef = a.completeOrthogonalDecomposition().solve(values);
  return std::sqrt(empirical_loss(a * coef, values));
}

Evaluable make_truth(const TruthSpec& spec, const SlabPolytope& poly, int n, std::optional<double> grid_delta) {
  switch (spec.kind) {
    case TruthSpec::Kind::Quadratic:
      return [](const PointMatrix& x) -> Vector { return x.rowwise().squaredNorm(); };
    case TruthSpec::Kind::PiecewiseAffine: {
      const PiecewiseAffineConvex f = *spec.pwa;
      return [f](const PointMatrix& x) { return f.evaluate(x); };
    }
    case TruthSpec::Kind::FTilde: {
      const int k = spec.k_sqrt_n ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))) : spec.k;
      const PiecewiseAffineConvex f = build_f_tilde(poly, k).function;
      return [f](const PointMatrix& x) { return f.evaluate(x); };
    }
    case TruthSpec::Kind::Bump: {
      const std::optional<double> delta = spec.bump_delta ? spec.bump_delta : grid_delta;
      require(delta.has_value(), "bump truth needs truth.delta under a uniform design");
      auto packing = std::make_shared<BumpPacking>(BumpPacking::build(poly, *delta, spec.bump_codewords, spec.bump_seed));
      const int member = spec.bump_member;
      return [packing, member](const PointMatrix& x) {
        Vector out(x.rows());
        for (Eigen::Index p = 0; p < x.rows(); ++p) out[p] = packing->eval(member, x.row(p).transpose());
        return out;
      };
    }
    case TruthSpec::Kind::Affine: {
      const Vector w = spec.affine_w;
      const double b = spec.affine_b;
      return [w, b](const PointMatrix& x) -> Vector { return (x * w).array() + b; };
    }
  }
  throw PreconditionError("unknown truth kind");
}

PointMatrix build_design(const ExperimentConfig& cfg, int n, int replicate, double* grid_delta) {
  if (cfg.design_kind == DesignKind::Grid) {
    GridDesign grid = grid_with_at_least(cfg.domain, n);
    if (grid_delta != nullptr) *grid_delta = grid.delta;
    return std::move(grid.points);
  }
  const auto seed = derive_seed({cfg.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(replicate), 1});
  return sample_uniform(cfg.domain, n, seed).points;
}

Replicate simulate_once(const ExperimentConfig& cfg, int n, int replicate_index) {
  require(std::find(cfg.n_list.begin(), cfg.n_list.end(), n) != cfg.n_list.end(), "n must be one of cfg.n_list");
  require(replicate_index >= 0, "replicate index must be nonnegative");
  double delta = 0.0;
  const PointMatrix x = build_design(cfg, n, replicate_index, &delta);
  const int realized = static_cast<int>(x.rows());
  const std::optional<double> grid_delta =
      cfg.design_kind == DesignKind::Grid ? std::optional<double>(delta) : std::nullopt;
  const Evaluable truth = make_truth(cfg.truth, cfg.domain, realized, grid_delta);
  const Vector f0 = truth(x);

  Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(replicate_index), 2}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector y(realized);
  for (int i = 0; i < realized; ++i) y[i] = f0[i] + cfg.sigma * normal(rng);

  const RegressionProblem problem(x, y, cfg.estimator);
  const LSEFit fitted = fit(problem, cfg.solver);

  Replicate out;
  out.realized_n = realized;
  out.converged = fitted.diagnostics.converged;
  out.lfrak = affine_distance(x, f0);
  if (cfg.design_kind == DesignKind::Grid) {
    Vector at_design(realized);
    for (int i = 0; i < realized; ++i) at_design[i] = fitted.theta[problem.origin()[static_cast<std::size_t>(i)]];
    out.loss = empirical_loss(at_design, f0);
  } else {
    const int m = cfg.mc_integration_points.value_or(50 * realized);
    const auto seed = derive_seed({cfg.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(replicate_index), 3});
    const Evaluable estimate = [&](const PointMatrix& p) { return extend(fitted, problem, p); };
    out.loss = population_loss(estimate, truth, cfg.domain, m, seed).mean;
  }
  return out;
}

RiskCurve run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  RiskCurve curve;
  for (const int n : cfg.n_list) {
    std::vector<Replicate> reps(static_cast<std::size_t>(cfg.replicates));
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < cfg.replicates; ++r) {
      try {
        reps[static_cast<std::size_t>(r)] = simulate_once(cfg, n, r);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);

    std::vector<double> losses, lfrak;
    RiskRow row;
    row.n = reps.front().realized_n;
    for (const Replicate& r : reps) {
      losses.push_back(r.loss);
      lfrak.push_back(r.lfrak);
      row.failures += r.converged ? 0 : 1;
    }
    const MeanStderr risk = mean_and_stderr(losses);
    row.mean_risk = risk.mean;
    row.std_error = risk.std_error;
    row.mean_lfrak = mean_and_stderr(lfrak).mean;
    curve.rows.push_back(row);
    if (log != nullptr) {
      *log << "n=" << row.n << " risk=" << row.mean_risk << " stderr=" << row.std_error
           << " failures=" << row.failures << '\n';
    }
  }
  return curve;
}

void RiskCurve::write_csv(std::ostream& os) const {
  os << "n,mean_risk,stderr,mean_Lfrak,failures\n";
  os << std::setprecision(17);
  for (const RiskRow& r : rows) {
    os << r.n << ',' << r.mean_risk << ',' << r.std_error << ',' << r.mean_lfrak << ',' << r.failures << '\n';
  }
}

RiskCurve RiskCurve::read_csv(std::istream& is) {
  RiskCurve curve;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "risk CSV is empty");
  require(line.rfind("n,mean_risk,stderr,mean_Lfrak,failures", 0) == 0, "risk CSV has an unexpected header");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    RiskRow r;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    ss >> r.n >> c1 >> r.mean_risk >> c2 >> r.std_error >> c3 >> r.mean_lfrak >> c4 >> r.failures;
    if (!ss || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw PreconditionError("risk CSV line " + std::to_string(lineno) + " is malformed");
    }
    curve.rows.push_back(r);
  }
  return curve;
}

RateFit fit_rate(const RiskCurve& curve) {
  require(curve.rows.size() >= 3, "fit_rate needs at least three rows");
  const std::size_t m = curve.rows.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t k = 0; k < m; ++k) {
    require(curve.rows[k].mean_risk > 0.0, "fit_rate needs positive risks");
    require(curve.rows[k].n > 0, "fit_rate needs positive n");
    lx[k] = std::log(static_cast<double>(curve.rows[k].n));
    ly[k] = std::log(curve.rows[k].mean_risk);
  }
  const double mx = pairwise_sum(lx) / static_cast<double>(m);
  const double my = pairwise_sum(ly) / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  require(sxx > 0.0, "fit_rate needs at least two distinct n");
  RateFit out;
  out.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double r = ly[k] - my - out.slope * (lx[k] - mx);
    ssr += r * r;
  }
  out.std_error = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
  return out;
}

double worst_case_exponent(int d) {
  require(d >= 1, "dimension must be positive");
  return d <= 4 ? -4.0 / (d + 4.0) : -2.0 / d;
}

double adaptive_exponent(int d) {
  require(d >= 1, "dimension must be positive");
  return d <= 4 ? -1.0 : -4.0 / d;
}

double minimax_exponent(int d) {
  require(d >= 1, "dimension must be positive");
  return -4.0 / (d + 4.0);
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::WorstCase: return "worst_case";
    case Regime::Adaptive: return "adaptive";
    case Regime::Minimax: return "minimax";
  }
  return "";
}

Regime regime_from_string(const std::string& s) {
  if (s == "worst_case") return Regime::WorstCase;
  if (s == "adaptive") return Regime::Adaptive;
  if (s == "minimax") return Regime::Minimax;
  throw PreconditionError("regime must be worst_case, adaptive or minimax; got \"" + s + "\"");
}

RateTable rate_report(const std::vector<RiskCurve>& curves, const std::vector<RegimeDescriptor>& regimes) {
  require(curves.size() == regimes.size(), "one regime descriptor per curve is required");
  RateTable table;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    RateEntry e;
    e.label = regimes[k].label;
    e.dim = regimes[k].dim;
    e.regime = regimes[k].regime;
    switch (e.regime) {
      case Regime::WorstCase: e.theory = worst_case_exponent(e.dim); break;
      case Regime::Adaptive: e.theory = adaptive_exponent(e.dim); break;
      case Regime::Minimax: e.theory = minimax_exponent(e.dim); break;
    }
    e.fitted = fit_rate(curves[k]);
    e.flagged = std::abs(e.fitted.slope - e.theory) > 2.0 * e.fitted.std_error + 0.15;
    table.entries.push_back(e);
  }
  return table;
}

void RateTable::write_csv(std::ostream& os) const {
  os << "label,d,regime,theory,fitted_slope,fitted_stderr,flagged\n";
  os << std::setprecision(17);
  for (const RateEntry& e : entries) {
    os << e.label << ',' << e.dim << ',' << to_string(e.regime) << ',' << e.theory << ',' << e.fitted.slope << ','
       << e.fitted.std_error << ',' << (e.flagged ? 1 : 0) << '\n';
  }
}

}  // namespace convexreg
