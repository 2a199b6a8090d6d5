#include "convexreg/lse.hpp"

#include "convexreg/kernels.hpp"
#include "convexreg/seeding.hpp"
#include "convexreg/small_qp.hpp"
#include "working_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace convexreg {

namespace {

constexpr double kMergeRadius = 1e-10;

int find_root(std::vector<int>& parent, int a) {
  while (parent[static_cast<std::size_t>(a)] != a) {
    parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    a = parent[static_cast<std::size_t>(a)];
  }
  return a;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

PointMatrix rows_from_json(const nlohmann::json& rows, const char* field) {
  require(rows.is_array() && !rows.empty(), std::string("\"") + field + "\" must be a nonempty array");
  const std::size_t d = rows.front().size();
  PointMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = rows[i].get<std::vector<double>>();
    if (row.size() != d) {
      std::ostringstream msg;
      msg << "\"" << field << "\"[" << i << "] has " << row.size() << " entries, expected " << d;
      throw PreconditionError(msg.str());
    }
    for (std::size_t c = 0; c < d; ++c) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
  }
  return out;
}

nlohmann::json rows_to_json(const PointMatrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return out;
}

}  // namespace

Variant Variant::bounded(double b) {
  require(b > 0.0 && std::isfinite(b), "bound B must be positive");
  return {Kind::Bounded, b, 0.0};
}

Variant Variant::lipschitz_with(double l) {
  require(l >= 0.0 && std::isfinite(l), "Lipschitz constant L must be nonnegative");
  return {Kind::Lipschitz, 0.0, l};
}

Variant Variant::bounded_lipschitz(double b, double l) {
  require(b > 0.0 && std::isfinite(b), "bound B must be positive");
  require(l >= 0.0 && std::isfinite(l), "Lipschitz constant L must be nonnegative");
  return {Kind::BoundedLipschitz, b, l};
}

nlohmann::json Variant::to_json() const {
  switch (kind) {
    case Kind::Full: return {{"type", "full"}};
    case Kind::Bounded: return {{"type", "bounded"}, {"B", bound}};
    case Kind::Lipschitz: return {{"type", "lipschitz"}, {"L", lipschitz}};
    case Kind::BoundedLipschitz: return {{"type", "bounded_lipschitz"}, {"B", bound}, {"L", lipschitz}};
  }
  return {};
}

Variant Variant::from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "full") return full();
  if (type == "bounded") return bounded(j.at("B").get<double>());
  if (type == "lipschitz") return lipschitz_with(j.at("L").get<double>());
  if (type == "bounded_lipschitz") return bounded_lipschitz(j.at("B").get<double>(), j.at("L").get<double>());
  throw PreconditionError("variant.type must be one of full, bounded, lipschitz, bounded_lipschitz; got \"" +
                          type + "\"");
}

RegressionProblem::RegressionProblem(PointMatrix design, Vector responses, Variant variant)
    : variant_(variant) {
  const int m = static_cast<int>(design.rows());
  require(m >= 1, "regression problem needs at least one observation");
  require(design.cols() >= 1, "design points need a positive dimension");
  require(responses.size() == m, "design and response counts differ");
  require(design.allFinite() && responses.allFinite(), "design and responses must be finite");

  std::vector<int> parent(static_cast<std::size_t>(m));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return design(a, 0) < design(b, 0); });
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const int i = order[a];
      const int j = order[b];
      if (design(j, 0) - design(i, 0) > kMergeRadius) break;
      if ((design.row(i) - design.row(j)).norm() <= kMergeRadius) {
        const int ri = find_root(parent, i);
        const int rj = find_root(parent, j);
        if (ri != rj) parent[static_cast<std::size_t>(std::max(ri, rj))] = std::min(ri, rj);
      }
    }
  }

  std::vector<int> slot(static_cast<std::size_t>(m), -1);
  origin_.resize(static_cast<std::size_t>(m));
  int count = 0;
  for (int i = 0; i < m; ++i) {
    const int r = find_root(parent, i);
    if (slot[static_cast<std::size_t>(r)] < 0) slot[static_cast<std::size_t>(r)] = count++;
    origin_[static_cast<std::size_t>(i)] = slot[static_cast<std::size_t>(r)];
  }
  design_.resize(count, design.cols());
  responses_ = Vector::Zero(count);
  weights_ = Vector::Zero(count);
  std::vector<bool> placed(static_cast<std::size_t>(count), false);
  for (int i = 0; i < m; ++i) {
    const int s = origin_[static_cast<std::size_t>(i)];
    if (!placed[static_cast<std::size_t>(s)]) {
      design_.row(s) = design.row(i);
      placed[static_cast<std::size_t>(s)] = true;
    }
    responses_[s] += responses[i];
    weights_[s] += 1.0;
  }
  responses_.array() /= weights_.array();
  within_ss_ = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = responses[i] - responses_[origin_[static_cast<std::size_t>(i)]];
    within_ss_ += r * r;
  }
  original_design_ = std::move(design);
  original_responses_ = std::move(responses);
}

RegressionProblem RegressionProblem::with_responses(const Vector& merged_responses) const {
  require(merged_responses.size() == n(), "response count must match the merged design");
  RegressionProblem out = *this;
  out.responses_ = merged_responses;
  out.within_ss_ = 0.0;
  for (int i = 0; i < observations(); ++i) {
    out.original_responses_[i] = merged_responses[origin_[static_cast<std::size_t>(i)]];
  }
  return out;
}

RegressionProblem RegressionProblem::with_variant(Variant v) const {
  RegressionProblem out = *this;
  out.variant_ = v;
  return out;
}

nlohmann::json RegressionProblem::to_json() const {
  return {{"X", rows_to_json(original_design_)},
          {"Y", std::vector<double>(original_responses_.data(), original_responses_.data() + original_responses_.size())},
          {"variant", variant_.to_json()}};
}

RegressionProblem RegressionProblem::from_json(const nlohmann::json& j) {
  require(j.contains("X"), "problem is missing field \"X\"");
  require(j.contains("Y"), "problem is missing field \"Y\"");
  PointMatrix x = rows_from_json(j.at("X"), "X");
  const auto y = j.at("Y").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    std::ostringstream msg;
    msg << "field \"Y\" has " << y.size() << " entries but \"X\" has " << x.rows() << " rows";
    throw PreconditionError(msg.str());
  }
  const Variant v = j.contains("variant") ? Variant::from_json(j.at("variant")) : Variant::full();
  return RegressionProblem(std::move(x), to_vector(y), v);
}

void SolverConfig::validate() const {
  require(max_iterations >= 1, "max_iterations must be at least 1");
  require(!eps_primal || *eps_primal > 0.0, "eps_primal must be positive");
  require(!eps_dual || *eps_dual > 0.0, "eps_dual must be positive");
  require(eps_feas > 0.0, "eps_feas must be positive");
  require(penalty_parameter > 0.0, "penalty_parameter must be positive");
  require(over_relaxation > 0.0 && over_relaxation < 2.0, "over_relaxation must lie in (0, 2)");
  require(max_rounds >= 1, "max_rounds must be at least 1");
}

double SolverConfig::primal_tolerance(int n) const { return eps_primal.value_or(1e-6 * std::sqrt(n)); }
double SolverConfig::dual_tolerance(int n) const { return eps_dual.value_or(1e-6 * std::sqrt(n)); }

nlohmann::json SolverConfig::to_json() const {
  nlohmann::json j = {{"max_iterations", max_iterations},
                      {"eps_feas", eps_feas},
                      {"penalty_parameter", penalty_parameter},
                      {"over_relaxation", over_relaxation},
                      {"polish", polish}};
  if (eps_primal) j["eps_primal"] = *eps_primal;
  if (eps_dual) j["eps_dual"] = *eps_dual;
  return j;
}

SolverConfig SolverConfig::from_json(const nlohmann::json& j) {
  SolverConfig c;
  if (j.contains("max_iterations")) c.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("eps_primal")) c.eps_primal = j.at("eps_primal").get<double>();
  if (j.contains("eps_dual")) c.eps_dual = j.at("eps_dual").get<double>();
  if (j.contains("eps_feas")) c.eps_feas = j.at("eps_feas").get<double>();
  if (j.contains("penalty_parameter")) c.penalty_parameter = j.at("penalty_parameter").get<double>();
  if (j.contains("over_relaxation")) c.over_relaxation = j.at("over_relaxation").get<double>();
  if (j.contains("polish")) c.polish = j.at("polish").get<bool>();
  c.validate();
  return c;
}

nlohmann::json LSEFit::to_json() const {
  const auto& d = diagnostics;
  return {{"theta", std::vector<double>(theta.data(), theta.data() + theta.size())},
          {"g", rows_to_json(subgradients)},
          {"diagnostics",
           {{"iterations", d.iterations},
            {"primal_residual", d.primal_residual},
            {"dual_residual", d.dual_residual},
            {"objective", d.objective},
            {"converged", d.converged},
            {"rounds", d.rounds},
            {"polished", d.polished},
            {"max_violation", d.max_violation}}}};
}

LSEFit LSEFit::from_json(const nlohmann::json& j) {
  LSEFit f;
  f.theta = to_vector(j.at("theta").get<std::vector<double>>());
  f.subgradients = rows_from_json(j.at("g"), "g");
  require(f.subgradients.rows() == f.theta.size(), "fit has mismatched theta and g lengths");
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    f.diagnostics.iterations = d.value("iterations", 0);
    f.diagnostics.primal_residual = d.value("primal_residual", 0.0);
    f.diagnostics.dual_residual = d.value("dual_residual", 0.0);
    f.diagnostics.objective = d.value("objective", 0.0);
    f.diagnostics.converged = d.value("converged", false);
    f.diagnostics.rounds = d.value("rounds", 0);
    f.diagnostics.polished = d.value("polished", false);
    f.diagnostics.max_violation = d.value("max_violation", 0.0);
  }
  return f;
}

namespace {

// Minimum-norm subgradient at every design point for fixed fitted values,
// allowing each plane to overshoot the others by `slack`. Rows whose
// program is infeasible (or exceeds the Lipschitz radius) keep `fallback`.
PointMatrix min_norm_subgradients(const PointMatrix& x, const Vector& theta, const PointMatrix& fallback,
                                  double slack, double tol, std::optional<double> radius) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  PointMatrix out = fallback;
  if (n == 1) {
    out.setZero();
    return out;
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < n; ++i) {
    PointMatrix normals(n - 1, d);
    Vector bounds(n - 1);
    int r = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      normals.row(r) = x.row(j) - x.row(i);
      bounds[r] = theta[j] - theta[i] + slack;
      ++r;
    }
    const auto g = min_norm_point(normals, bounds, tol);
    if (g && (!radius || g->norm() <= *radius + tol)) out.row(i) = g->transpose();
  }
  return out;
}

// Replaces (theta, g) by the values and supporting slopes of the convex
// function max_i theta_i + g_i . (x - X_i) at the design points. The result
// is feasible up to rounding whatever the input.
void convexify(const PointMatrix& x, Vector& theta, PointMatrix& g) {
  const int n = static_cast<int>(x.rows());
  const Vector intercepts = theta - g.cwiseProduct(x).rowwise().sum();
  Vector lifted(n);
  PointMatrix slopes(n, x.cols());
  for (int j = 0; j < n; ++j) {
    int arg = j;
    double best = theta[j];
    for (int i = 0; i < n; ++i) {
      const double v = intercepts[i] + g.row(i).dot(x.row(j));
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    lifted[j] = best;
    slopes.row(j) = g.row(arg);
  }
  theta = lifted;
  g = slopes;
}

struct Engine {
  const RegressionProblem& problem;
  const SolverConfig& config;
  SplittingProblem base;
  SplittingSettings settings;

  Engine(const RegressionProblem& p, const SolverConfig& c) : problem(p), config(c) {
    const int n = p.n();
    base.design = &p.design();
    base.weights = p.weights();
    base.linear = -p.weights().cwiseProduct(p.responses());
    const Variant& v = p.variant();
    if (v.has_bound()) {
      for (int i = 0; i < n; ++i) base.boxes.push_back({i, -v.bound, v.bound});
    }
    if (v.has_lipschitz()) base.gradient_radius = v.lipschitz;
    settings.max_iterations = c.max_iterations;
    settings.eps_primal = c.primal_tolerance(n);
    settings.eps_dual = c.dual_tolerance(n);
    settings.rho = c.penalty_parameter;
    settings.alpha = c.over_relaxation;
  }

  // Rows held at equality during polishing, with a warm start for them.
  struct Polished {
    SplittingProblem rows;
    SplittingState state;
  };

  // The rows the duals mark as active; every other row is dropped.
  Polished active_rows(const std::vector<PairConstraint>& pairs, const SplittingState& s, double margin = 1.0) const {
    Polished out{base, {}};
    out.rows.pairs.clear();
    out.rows.boxes.clear();
    out.state.theta = s.theta;
    out.state.grads = s.grads;
    std::vector<double> py, by, bz;
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      const auto k = static_cast<Eigen::Index>(r);
      if (s.pair_y[k] > -margin * s.pair_z[k]) {
        out.rows.pairs.push_back({pairs[r].i, pairs[r].j, true});
        py.push_back(s.pair_y[k]);
      }
    }
    for (std::size_t b = 0; b < base.boxes.size(); ++b) {
      const auto k = static_cast<Eigen::Index>(b);
      const BoxConstraint& box = base.boxes[b];
      double at = 0.0;
      if (s.box_y[k] > box.upper - s.box_z[k]) {
        at = box.upper;
      } else if (s.box_y[k] < box.lower - s.box_z[k]) {
        at = box.lower;
      } else {
        continue;
      }
      out.rows.boxes.push_back({box.i, at, at});
      bz.push_back(at);
      by.push_back(s.box_y[k]);
    }
    out.state.pair_z = Vector::Zero(static_cast<Eigen::Index>(py.size()));
    out.state.pair_y = to_vector(py);
    out.state.box_z = to_vector(bz);
    out.state.box_y = to_vector(by);
    return out;
  }

  // Equality-constrained re-solve. The caller certifies the result by
  // feasibility and optimality, so no convergence flag is needed here.
  Polished polish(const Polished& start, int& iterations) const {
    SplittingSettings tight = settings;
    const double scale = std::max(1.0, base.linear.norm());
    tight.eps_primal = 1e-10 * scale;
    tight.eps_dual = 1e-10 * scale;
    tight.max_iterations = 400;
    // Method of multipliers: a large fixed penalty converges in a few
    // dozen steps on an equality-only problem.
    tight.rho = 1.0;
    tight.alpha = 1.0;
    tight.adapt_interval = 0;
    const SplittingResult r = solve_splitting(start.rows, tight, &start.state);
    iterations += r.iterations;
    return {start.rows, r.state};
  }
};

// Next row set after an uncertified polish: adds the violated pairs and
// box sides, or else releases rows whose multipliers came out negative.
// Returns false when nothing changes.
bool refine_rows(Engine::Polished& p, const PointMatrix& x, const Variant& v, double tol) {
  const Vector& theta = p.state.theta;
  SplittingProblem& rows = p.rows;
  std::vector<PairConstraint> pairs;
  std::vector<BoxConstraint> boxes;
  std::vector<double> py, by;
  const auto violated = kernels::parallel::scan_violations(x, theta, p.state.grads, tol, 8);
  bool outside = false;
  if (v.has_bound()) {
    for (int i = 0; i < theta.size(); ++i) outside = outside || std::abs(theta[i]) > v.bound + tol;
  }
  if (!violated.empty() || outside) {
    pairs = rows.pairs;
    boxes = rows.boxes;
    py.assign(p.state.pair_y.data(), p.state.pair_y.data() + p.state.pair_y.size());
    by.assign(p.state.box_y.data(), p.state.box_y.data() + p.state.box_y.size());
    for (const auto& c : violated) {
      pairs.push_back({c.i, c.j, true});
      py.push_back(0.0);
    }
    if (outside) {
      for (int i = 0; i < theta.size(); ++i) {
        if (std::abs(theta[i]) <= v.bound + tol) continue;
        const double at = theta[i] > 0.0 ? v.bound : -v.bound;
        boxes.push_back({i, at, at});
        by.push_back(0.0);
      }
    }
  } else {
    for (std::size_t r = 0; r < rows.pairs.size(); ++r) {
      const double y = p.state.pair_y[static_cast<Eigen::Index>(r)];
      if (y >= -tol) {
        pairs.push_back(rows.pairs[r]);
        py.push_back(y);
      }
    }
    for (std::size_t b = 0; b < rows.boxes.size(); ++b) {
      const double y = p.state.box_y[static_cast<Eigen::Index>(b)];
      if ((rows.boxes[b].upper > 0.0 ? y : -y) >= -tol) {
        boxes.push_back(rows.boxes[b]);
        by.push_back(y);
      }
    }
    if (pairs.size() == rows.pairs.size() && boxes.size() == rows.boxes.size()) return false;
  }
  rows.pairs = pairs;
  rows.boxes = boxes;
  p.state.pair_y = to_vector(py);
  p.state.pair_z = Vector::Zero(static_cast<Eigen::Index>(py.size()));
  p.state.box_y = to_vector(by);
  p.state.box_z = Vector::Zero(static_cast<Eigen::Index>(by.size()));
  for (std::size_t b = 0; b < boxes.size(); ++b) p.state.box_z[static_cast<Eigen::Index>(b)] = boxes[b].upper;
  return true;
}

constexpr int kCertifyMaxVariables = 1000;
constexpr int kPolishAttempts = 6;
// How far (in primal tolerances) the splitting fit may sit from data that are
// then tested for feasibility directly.
constexpr double kFeasibleDataGate = 100.0;
constexpr double kRetightenFactor = 1e-2;
// Interior iterates keep every multiplier positive, so a row counts as active
// only when its multiplier clearly dominates its slack.
constexpr double kInteriorMargin = 100.0;
// Above this the interior factorizations cost more than the splitting iterations.
constexpr int kInteriorMaxPoints = 1000;

// True when -grad lies in the cone of the rows held at equality, i.e. the
// point satisfies the KKT conditions with nonnegative multipliers. The cone
// residual is |c + z| for the minimum-norm z with M^T z <= -M^T c (Moreau),
// which stays well defined when rows are redundant.
bool kkt_certified(const SplittingProblem& eq, const Vector& theta, const Vector& responses) {
  const PointMatrix& x = *eq.design;
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int vars = n * (1 + d);
  const int rows = static_cast<int>(eq.pairs.size() + eq.boxes.size());
  if (vars > kCertifyMaxVariables) return false;
  Vector c = Vector::Zero(vars);
  c.head(n) = -eq.weights.cwiseProduct(theta - responses);
  if (rows == 0) return c.norm() <= 1e-9 * std::max(1.0, responses.norm());
  PointMatrix m = PointMatrix::Zero(rows, vars);
  int r = 0;
  for (const PairConstraint& p : eq.pairs) {
    m(r, p.i) += 1.0;
    m(r, p.j) -= 1.0;
    for (int k = 0; k < d; ++k) m(r, n + p.i * d + k) = x(p.j, k) - x(p.i, k);
    ++r;
  }
  for (const BoxConstraint& b : eq.boxes) {
    m(r, b.i) = b.upper > 0.0 ? 1.0 : -1.0;
    ++r;
  }
  const Vector bounds = -(m * c);
  const auto z = min_norm_point(m, bounds, 1e-12);
  if (!z) return false;
  return (c + *z).norm() <= 1e-8 * std::max(1.0, responses.norm());
}

std::optional<double> lipschitz_radius(const RegressionProblem& p) {
  return p.variant().has_lipschitz() ? std::optional<double>(p.variant().lipschitz) : std::nullopt;
}

}  // namespace

LSEFit fit(const RegressionProblem& problem, const SolverConfig& config) {
  config.validate();
  const int n = problem.n();
  const int d = problem.dim();
  const Variant& v = problem.variant();
  const PointMatrix& x = problem.design();
  LSEFit out;

  if (n == 1) {
    double t = problem.responses()[0];
    if (v.has_bound()) t = std::clamp(t, -v.bound, v.bound);
    out.theta = Vector::Constant(1, t);
    out.subgradients = PointMatrix::Zero(1, d);
    out.diagnostics.converged = true;
    out.diagnostics.polished = true;
  } else {
    Engine engine(problem, config);
    detail::WorkingSetOptions opts;
    opts.neighbors = config.neighbors;
    opts.max_rounds = config.max_rounds;
    opts.eps_feas = config.eps_feas;
    opts.interior = !v.has_lipschitz() && n <= kInteriorMaxPoints;
    detail::WorkingSet ws(x, opts);
    auto outcome = ws.solve(engine.base, engine.settings);
    int iterations = outcome.result.iterations;
    int rounds = outcome.rounds;
    bool polished = false;

    auto objective = [&](const Vector& theta) {
      return problem.weights().dot((theta - problem.responses()).cwiseAbs2());
    };
    // Feasible candidate straight from the splitting iterate.
    out.theta = outcome.result.state.theta;
    out.subgradients = outcome.result.state.grads;
    if (v.has_bound()) out.theta = out.theta.cwiseMax(-v.bound).cwiseMin(v.bound);
    if (v.has_lipschitz()) {
      for (int i = 0; i < n; ++i) {
        const double norm = out.subgradients.row(i).norm();
        if (norm > v.lipschitz) out.subgradients.row(i) *= v.lipschitz / norm;
      }
    }
    if (kernels::parallel::max_pair_violation(x, out.theta, out.subgradients) > 0.0) {
      const PointMatrix g =
          min_norm_subgradients(x, out.theta, out.subgradients, 0.5 * config.eps_feas, 1e-12, lipschitz_radius(problem));
      if (kernels::parallel::max_pair_violation(x, out.theta, g) <= config.eps_feas) {
        out.subgradients = g;
      } else {
        convexify(x, out.theta, out.subgradients);
        // Shrinking toward the zero function keeps convexity and the
        // Lipschitz radius while restoring the bound.
        const double top = out.theta.cwiseAbs().maxCoeff();
        if (v.has_bound() && top > v.bound) {
          out.theta *= v.bound / top;
          out.subgradients *= v.bound / top;
        }
      }
    }

    // Data the solver cannot tell apart from its own fit may already be
    // feasible, in which case they are the projection.
    const Vector& y = problem.responses();
    if ((outcome.result.state.theta - y).cwiseAbs().maxCoeff() <= kFeasibleDataGate * config.primal_tolerance(n) &&
        (!v.has_bound() || y.cwiseAbs().maxCoeff() <= v.bound)) {
      const PointMatrix g = min_norm_subgradients(x, y, out.subgradients, 0.0, 1e-12, lipschitz_radius(problem));
      const bool in_ball = !v.has_lipschitz() || g.rowwise().norm().maxCoeff() <= v.lipschitz;
      if (in_ball && kernels::parallel::max_pair_violation(x, y, g) <= config.eps_feas) {
        out.theta = y;
        out.subgradients = g;
        polished = true;
      }
    }

    if (config.polish && !polished && !v.has_lipschitz()) {
      const double tol = 1e-9 * std::max(1.0, engine.base.linear.norm());
      auto try_polish = [&](const SplittingState& from, double margin, double allowance) {
        Engine::Polished p = engine.active_rows(ws.pairs(), from, margin);
        for (int attempt = 0; attempt < kPolishAttempts; ++attempt) {
          p = engine.polish(p, iterations);
          if (!p.state.theta.allFinite() || !p.state.grads.allFinite()) return false;
          Vector theta = p.state.theta;
          const bool in_box = !v.has_bound() || theta.cwiseAbs().maxCoeff() <= v.bound + tol;
          if (v.has_bound()) theta = theta.cwiseMax(-v.bound).cwiseMin(v.bound);
          if (in_box) {
            const PointMatrix g = min_norm_subgradients(x, theta, p.state.grads, 0.0, 1e-10, std::nullopt);
            const bool feasible = kernels::parallel::max_pair_violation(x, theta, g) <= config.eps_feas;
            if (feasible && (objective(theta) <= objective(out.theta) + allowance ||
                             kkt_certified(p.rows, theta, problem.responses()))) {
              out.theta = theta;
              out.subgradients = g;
              return true;
            }
          }
          if (!refine_rows(p, x, v, tol)) return false;
        }
        return false;
      };
      // A feasible point within the interior duality gap of the candidate is as
      // close to optimal as the candidate itself.
      polished = opts.interior ? try_polish(outcome.result.state, kInteriorMargin, 2.0 * outcome.result.complementarity)
                               : try_polish(outcome.result.state, 1.0, 0.0);
      if (!polished) {
        // The duals were too coarse to read the active set; tighten once.
        SplittingProblem full = engine.base;
        full.pairs = ws.pairs();
        SplittingSettings tight = engine.settings;
        tight.eps_primal *= kRetightenFactor;
        tight.eps_dual *= kRetightenFactor;
        tight.rho = outcome.result.rho;
        const SplittingResult r = solve_splitting(full, tight, &outcome.result.state);
        iterations += r.iterations;
        polished = try_polish(r.state, 1.0, 0.0);
      }
    }
    if (!polished) {
      out.subgradients = min_norm_subgradients(x, out.theta, out.subgradients, 0.0, 1e-12, lipschitz_radius(problem));
    }
    out.diagnostics.iterations = iterations;
    out.diagnostics.rounds = rounds;
    out.diagnostics.primal_residual = outcome.result.primal_residual;
    out.diagnostics.dual_residual = outcome.result.dual_residual;
    out.diagnostics.polished = polished;
    out.diagnostics.converged = polished || (outcome.result.converged && outcome.complete);
  }

  const Vector r = out.theta - problem.responses();
  out.diagnostics.objective = problem.weights().dot(r.cwiseAbs2()) + problem.within_group_ss();
  out.diagnostics.max_violation = kernels::parallel::max_pair_violation(x, out.theta, out.subgradients);
  if (v.has_bound()) {
    out.diagnostics.max_violation = std::max(out.diagnostics.max_violation, out.theta.cwiseAbs().maxCoeff() - v.bound);
  }
  if (v.has_lipschitz()) {
    out.diagnostics.max_violation =
        std::max(out.diagnostics.max_violation, out.subgradients.rowwise().norm().maxCoeff() - v.lipschitz);
  }
  out.diagnostics.converged = out.diagnostics.converged && out.diagnostics.max_violation <= config.eps_feas;
  return out;
}

double extend(const LSEFit& fit, const RegressionProblem& problem, const Vector& x) {
  require(x.size() == problem.dim(), "point dimension does not match the design");
  require(fit.theta.size() == problem.n(), "fit and problem sizes differ");
  const PointMatrix& X = problem.design();
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < problem.n(); ++i) {
    best = std::max(best, fit.theta[i] + fit.subgradients.row(i).dot(x - X.row(i).transpose()));
  }
  if (problem.variant().has_bound()) best = std::clamp(best, -problem.variant().bound, problem.variant().bound);
  return best;
}

Vector extend(const LSEFit& fit, const RegressionProblem& problem, const PointMatrix& points) {
  require(points.cols() == problem.dim(), "point dimension does not match the design");
  require(fit.theta.size() == problem.n(), "fit and problem sizes differ");
  const Vector intercepts =
      fit.theta - (fit.subgradients.cwiseProduct(problem.design())).rowwise().sum();
  Vector out;
  kernels::parallel::max_affine(fit.subgradients, intercepts, points, out);
  if (problem.variant().has_bound()) {
    const double b = problem.variant().bound;
    out = out.cwiseMax(-b).cwiseMin(b);
  }
  return out;
}

KKTReport check_kkt(const LSEFit& fit, const RegressionProblem& problem, int probes, std::uint64_t seed,
                    const SolverConfig& config) {
  require(fit.theta.size() == problem.n(), "fit and problem sizes differ");
  KKTReport report;
  const Variant& v = problem.variant();
  report.max_violation = kernels::parallel::max_pair_violation(problem.design(), fit.theta, fit.subgradients);
  if (v.has_bound()) report.max_bound_violation = std::max(0.0, fit.theta.cwiseAbs().maxCoeff() - v.bound);
  if (v.has_lipschitz()) {
    report.max_bound_violation =
        std::max(report.max_bound_violation, fit.subgradients.rowwise().norm().maxCoeff() - v.lipschitz);
  }
  if (probes <= 0) return report;

  const int n = problem.n();
  const Vector residual = problem.weights().cwiseProduct(problem.responses() - fit.theta);
  auto statistic = [&](const Vector& probe) { return residual.dot(probe - fit.theta); };

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double spread = std::max(1.0, std::sqrt((problem.responses().array() - problem.responses().mean()).square().mean()));

  std::vector<Vector> pool;
  // Constants are feasible for every variant.
  double c = problem.responses().mean();
  if (v.has_bound()) c = std::clamp(c, -v.bound, v.bound);
  pool.push_back(Vector::Constant(n, c));
  pool.push_back(Vector::Zero(n));
  const int fitted = std::min(probes, 6);
  for (int k = 0; k < fitted; ++k) {
    Vector y(n);
    const double scale = spread * (k % 2 == 0 ? 1.0 : 0.1);
    for (int i = 0; i < n; ++i) y[i] = fit.theta[i] + scale * normal(rng);
    const LSEFit probe = convexreg::fit(problem.with_responses(y), config);
    if (probe.diagnostics.converged) pool.push_back(probe.theta);
  }

  report.probes = 0;
  report.projection_statistic = -std::numeric_limits<double>::infinity();
  for (const Vector& p : pool) {
    if (report.probes >= probes) break;
    report.projection_statistic = std::max(report.projection_statistic, statistic(p));
    ++report.probes;
  }
  const int base = static_cast<int>(pool.size());
  while (report.probes < probes) {
    Vector w(base);
    for (int k = 0; k < base; ++k) w[k] = -std::log(std::max(unit(rng), 1e-300));
    w /= w.sum();
    Vector p = Vector::Zero(n);
    for (int k = 0; k < base; ++k) p += w[k] * pool[static_cast<std::size_t>(k)];
    report.projection_statistic = std::max(report.projection_statistic, statistic(p));
    ++report.probes;
  }
  return report;
}

}  // namespace convexreg
