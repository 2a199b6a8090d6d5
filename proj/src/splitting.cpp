#include "convexreg/splitting.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace convexreg {

namespace {

constexpr double kEqualityScale = 1e3;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
// Interior point: clamp on the row weights lambda/s and the step fraction
// kept away from the boundary.
constexpr double kDiagonalMin = 1e-14;
constexpr double kDiagonalMax = 1e14;
constexpr double kStepFraction = 0.99;
constexpr int kRefinePasses = 2;

// Row layout of the stacked constraint vector: [pairs | boxes | grads | ball].
struct Layout {
  int n = 0;
  int d = 0;
  int pairs = 0;
  int boxes = 0;
  bool grad = false;
  bool ball = false;

  int box_offset() const { return pairs; }
  int grad_offset() const { return pairs + boxes; }
  int ball_offset() const { return grad_offset() + (grad ? n * d : 0); }
  int rows() const { return ball_offset() + (ball ? n : 0); }
};

class Operator {
public:
  Operator(const SplittingProblem& p, const Layout& layout) : p_(p), layout_(layout) {
    const PointMatrix& x = *p.design;
    offsets_.resize(layout.pairs, layout.d);
    from_.assign(static_cast<std::size_t>(layout.n), {});
    for (int r = 0; r < layout.pairs; ++r) {
      const PairConstraint& c = p.pairs[static_cast<std::size_t>(r)];
      offsets_.row(r) = x.row(c.j) - x.row(c.i);
      from_[static_cast<std::size_t>(c.i)].push_back(r);
    }
    // Subgradients are iterated as g * scale_ so the pair rows have unit
    // sized coefficients in both blocks.
    if (layout.pairs > 0) {
      const double rms = std::sqrt(offsets_.squaredNorm() / layout.pairs);
      if (rms > 0.0) scale_ = rms;
    }
    offsets_ /= scale_;
  }

  double scale() const { return scale_; }
  const PointMatrix& offsets() const { return offsets_; }
  const std::vector<std::vector<int>>& rows_from() const { return from_; }

  void apply(const Vector& theta, const PointMatrix& g, Vector& out) const {
    out.resize(layout_.rows());
    const int d = layout_.d;
    for (int r = 0; r < layout_.pairs; ++r) {
      const PairConstraint& c = p_.pairs[static_cast<std::size_t>(r)];
      double v = theta[c.i] - theta[c.j];
      for (int k = 0; k < d; ++k) v += g(c.i, k) * offsets_(r, k);
      out[r] = v;
    }
    for (int b = 0; b < layout_.boxes; ++b) out[layout_.box_offset() + b] = theta[p_.boxes[static_cast<std::size_t>(b)].i];
    if (layout_.grad) {
      out.segment(layout_.grad_offset(), layout_.n * d) = Eigen::Map<const Vector>(g.data(), layout_.n * d);
    }
    if (layout_.ball) out.segment(layout_.ball_offset(), layout_.n) = theta;
  }

  void apply_transpose(const Vector& y, Vector& theta, PointMatrix& g) const {
    const int d = layout_.d;
    theta.setZero(layout_.n);
    g.setZero(layout_.n, d);
    for (int r = 0; r < layout_.pairs; ++r) {
      const PairConstraint& c = p_.pairs[static_cast<std::size_t>(r)];
      theta[c.i] += y[r];
      theta[c.j] -= y[r];
      for (int k = 0; k < d; ++k) g(c.i, k) += y[r] * offsets_(r, k);
    }
    for (int b = 0; b < layout_.boxes; ++b) theta[p_.boxes[static_cast<std::size_t>(b)].i] += y[layout_.box_offset() + b];
    if (layout_.grad) {
      Eigen::Map<Vector>(g.data(), layout_.n * d) += y.segment(layout_.grad_offset(), layout_.n * d);
    }
    if (layout_.ball) theta += y.segment(layout_.ball_offset(), layout_.n);
  }

  void project(Vector& v) const {
    for (int r = 0; r < layout_.pairs; ++r) {
      v[r] = p_.pairs[static_cast<std::size_t>(r)].equality ? 0.0 : std::min(v[r], 0.0);
    }
    for (int b = 0; b < layout_.boxes; ++b) {
      const BoxConstraint& bc = p_.boxes[static_cast<std::size_t>(b)];
      double& e = v[layout_.box_offset() + b];
      e = std::clamp(e, bc.lower, bc.upper);
    }
    if (layout_.grad) {
      const double radius = *p_.gradient_radius * scale_;
      for (int i = 0; i < layout_.n; ++i) {
        auto seg = v.segment(layout_.grad_offset() + i * layout_.d, layout_.d);
        const double norm = seg.norm();
        if (norm > radius) seg *= norm > 0.0 ? radius / norm : 0.0;
      }
    }
    if (layout_.ball) {
      auto seg = v.segment(layout_.ball_offset(), layout_.n);
      const ValueBall& ball = *p_.value_ball;
      const Vector offset = seg - ball.center;
      const double norm = offset.norm();
      if (norm > ball.radius) seg = ball.center + offset * (ball.radius / norm);
    }
  }

  Vector row_rho(double rho) const {
    Vector out = Vector::Constant(layout_.rows(), rho);
    for (int r = 0; r < layout_.pairs; ++r) {
      if (p_.pairs[static_cast<std::size_t>(r)].equality) out[r] *= kEqualityScale;
    }
    for (int b = 0; b < layout_.boxes; ++b) {
      const BoxConstraint& bc = p_.boxes[static_cast<std::size_t>(b)];
      if (bc.lower == bc.upper) out[layout_.box_offset() + b] *= kEqualityScale;
    }
    return out;
  }

private:
  const SplittingProblem& p_;
  const Layout& layout_;
  PointMatrix offsets_;
  std::vector<std::vector<int>> from_;
  double scale_ = 1.0;
};

// Factorization of sigma I + P + A^T diag(rho) A with the subgradient blocks
// eliminated.
class SchurSystem {
public:
  SchurSystem(const SplittingProblem& p, const Layout& layout, const Operator& op, const Vector& rho,
              double sigma) {
    const int n = layout.n;
    const int d = layout.d;
    Vector diag = Vector::Constant(n, sigma) + p.weights;
    for (int b = 0; b < layout.boxes; ++b) {
      diag[p.boxes[static_cast<std::size_t>(b)].i] += rho[layout.box_offset() + b];
    }
    if (layout.ball) diag += rho.segment(layout.ball_offset(), n);

    dinv_.resize(static_cast<std::size_t>(n));
    cols_.resize(static_cast<std::size_t>(n));
    coef_.resize(static_cast<std::size_t>(n));
    long estimate = n;
    for (int i = 0; i < n; ++i) {
      const auto& rows = op.rows_from()[static_cast<std::size_t>(i)];
      Matrix block = Matrix::Identity(d, d) * sigma;
      if (layout.grad) block.diagonal().array() += rho.segment(layout.grad_offset() + i * d, d).array();
      auto& cols = cols_[static_cast<std::size_t>(i)];
      auto& coef = coef_[static_cast<std::size_t>(i)];
      cols.assign(1, i);
      coef.setZero(static_cast<Eigen::Index>(rows.size()) + 1, d);
      for (std::size_t q = 0; q < rows.size(); ++q) {
        const int r = rows[q];
        const auto off = op.offsets().row(r);
        block.noalias() += rho[r] * off.transpose() * off;
        coef.row(0) += rho[r] * off;
        coef.row(static_cast<Eigen::Index>(q) + 1) = -rho[r] * off;
        cols.push_back(p.pairs[static_cast<std::size_t>(r)].j);
      }
      dinv_[static_cast<std::size_t>(i)] = block.llt().solve(Matrix::Identity(d, d));
      estimate += static_cast<long>(cols.size() * cols.size());
    }
    estimate += 2L * layout.pairs;
    dense_ = n <= 300 || static_cast<double>(estimate) > 0.03 * static_cast<double>(n) * n;

    if (dense_) {
      Matrix s = Matrix::Zero(n, n);
      s.diagonal() = diag;
      add_laplacian(p, layout, rho, [&](int a, int b, double v) { s(a, b) += v; });
      add_schur(d, [&](int a, int b, double v) { s(a, b) += v; });
      dense_llt_.compute(s);
      ok_ = dense_llt_.info() == Eigen::Success;
    } else {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(static_cast<std::size_t>(estimate) + static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
      auto push = [&](int a, int b, double v) { trip.emplace_back(a, b, v); };
      add_laplacian(p, layout, rho, push);
      add_schur(d, push);
      Eigen::SparseMatrix<double> s(n, n);
      s.setFromTriplets(trip.begin(), trip.end());
      sparse_llt_.compute(s);
      ok_ = sparse_llt_.info() == Eigen::Success;
    }
  }

  bool ok() const { return ok_; }

  void solve(const Vector& rhs_theta, const PointMatrix& rhs_g, Vector& theta, PointMatrix& g) const {
    const int n = static_cast<int>(rhs_theta.size());
    const int d = static_cast<int>(rhs_g.cols());
    Vector reduced = rhs_theta;
    Vector t(d);
    for (int i = 0; i < n; ++i) {
      t.noalias() = dinv_[static_cast<std::size_t>(i)] * rhs_g.row(i).transpose();
      const auto& cols = cols_[static_cast<std::size_t>(i)];
      const auto& coef = coef_[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < cols.size(); ++a) reduced[cols[a]] -= coef.row(static_cast<Eigen::Index>(a)).dot(t);
    }
    theta = dense_ ? Vector(dense_llt_.solve(reduced)) : Vector(sparse_llt_.solve(reduced));
    g.resize(n, d);
    Vector acc(d);
    for (int i = 0; i < n; ++i) {
      acc = rhs_g.row(i).transpose();
      const auto& cols = cols_[static_cast<std::size_t>(i)];
      const auto& coef = coef_[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < cols.size(); ++a) acc -= coef.row(static_cast<Eigen::Index>(a)).transpose() * theta[cols[a]];
      g.row(i).noalias() = (dinv_[static_cast<std::size_t>(i)] * acc).transpose();
    }
  }

private:
  template <class Add>
  static void add_laplacian(const SplittingProblem& p, const Layout& layout, const Vector& rho, Add add) {
    for (int r = 0; r < layout.pairs; ++r) {
      const PairConstraint& c = p.pairs[static_cast<std::size_t>(r)];
      add(c.i, c.i, rho[r]);
      add(c.j, c.j, rho[r]);
      add(c.i, c.j, -rho[r]);
      add(c.j, c.i, -rho[r]);
    }
  }

  template <class Add>
  void add_schur(int d, Add add) const {
    PointMatrix u;
    for (std::size_t i = 0; i < cols_.size(); ++i) {
      const auto& cols = cols_[i];
      const auto& coef = coef_[i];
      u = coef * dinv_[i];  // rows: (D^-1 c_a)^T, D symmetric
      const Matrix block = u * coef.transpose();
      for (std::size_t a = 0; a < cols.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
          add(cols[a], cols[b], -block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
        }
      }
    }
    (void)d;
  }

  std::vector<Matrix> dinv_;
  std::vector<std::vector<int>> cols_;
  std::vector<PointMatrix> coef_;
  bool dense_ = true;
  bool ok_ = false;
  Eigen::LLT<Matrix> dense_llt_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sparse_llt_;
};

Vector stack(const Layout& layout, const Vector& pair, const Vector& box, const PointMatrix& grad,
             const Vector& ball) {
  Vector out = Vector::Zero(layout.rows());
  if (pair.size() > 0) out.head(std::min<Eigen::Index>(pair.size(), layout.pairs)) = pair.head(std::min<Eigen::Index>(pair.size(), layout.pairs));
  if (layout.boxes > 0 && box.size() == layout.boxes) out.segment(layout.box_offset(), layout.boxes) = box;
  if (layout.grad && grad.rows() == layout.n && grad.cols() == layout.d) {
    out.segment(layout.grad_offset(), layout.n * layout.d) = Eigen::Map<const Vector>(grad.data(), layout.n * layout.d);
  }
  if (layout.ball && ball.size() == layout.n) out.segment(layout.ball_offset(), layout.n) = ball;
  return out;
}

void unstack(const Layout& layout, const Vector& v, Vector& pair, Vector& box, PointMatrix& grad, Vector& ball) {
  pair = v.head(layout.pairs);
  box = v.segment(layout.box_offset(), layout.boxes);
  if (layout.grad) {
    grad = Eigen::Map<const PointMatrix>(v.data() + layout.grad_offset(), layout.n, layout.d);
  } else {
    grad.resize(0, 0);
  }
  ball = layout.ball ? Vector(v.segment(layout.ball_offset(), layout.n)) : Vector();
}

}  // namespace

SplittingResult solve_splitting(const SplittingProblem& problem, const SplittingSettings& settings,
                                const SplittingState* warm) {
  require(problem.design != nullptr, "splitting problem has no design");
  Layout layout;
  layout.n = problem.n();
  layout.d = problem.dim();
  layout.pairs = static_cast<int>(problem.pairs.size());
  layout.boxes = static_cast<int>(problem.boxes.size());
  layout.grad = problem.gradient_radius.has_value();
  layout.ball = problem.value_ball.has_value();
  require(problem.weights.size() == layout.n && problem.linear.size() == layout.n,
          "objective vectors must have one entry per design point");

  const int n = layout.n;
  const int d = layout.d;
  const Operator op(problem, layout);

  Vector theta = Vector::Zero(n);
  PointMatrix g = PointMatrix::Zero(n, d);
  if (warm != nullptr && warm->theta.size() == n && warm->grads.rows() == n && warm->grads.cols() == d) {
    theta = warm->theta;
    g = warm->grads * op.scale();
  }
  Vector ax;
  op.apply(theta, g, ax);
  Vector z = ax;
  Vector y = Vector::Zero(layout.rows());
  if (warm != nullptr) {
    const Vector wz = stack(layout, warm->pair_z, warm->box_z, warm->grad_z * op.scale(), warm->ball_z);
    const Vector wy = stack(layout, warm->pair_y, warm->box_y, warm->grad_y / op.scale(), warm->ball_y);
    // Rows without a warm value keep the projection of A x.
    for (int r = 0; r < layout.rows(); ++r) {
      const bool have_pair = r < layout.pairs && r < warm->pair_z.size();
      const bool other = r >= layout.pairs;
      if (have_pair || other) {
        y[r] = wy[r];
        if (have_pair || (other && wz[r] != 0.0)) z[r] = wz[r];
      }
    }
  }
  op.project(z);

  double rho = settings.rho;
  Vector rho_rows = op.row_rho(rho);
  auto system = std::make_unique<SchurSystem>(problem, layout, op, rho_rows, settings.sigma);
  SplittingResult result;
  result.factorizations = 1;

  const double alpha = settings.alpha;
  const double sigma = settings.sigma;
  Vector w_rows, rhs_theta, theta_tilde, z_tilde, z_hat, aty_theta;
  PointMatrix rhs_g, g_tilde, aty_g;
  double prim = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  int it = 0;
  for (it = 1; it <= settings.max_iterations; ++it) {
    w_rows = rho_rows.cwiseProduct(z) - y;
    op.apply_transpose(w_rows, rhs_theta, rhs_g);
    rhs_theta += sigma * theta - problem.linear;
    rhs_g += sigma * g;
    system->solve(rhs_theta, rhs_g, theta_tilde, g_tilde);
    op.apply(theta_tilde, g_tilde, z_tilde);

    theta = alpha * theta_tilde + (1.0 - alpha) * theta;
    g = alpha * g_tilde + (1.0 - alpha) * g;
    z_hat = alpha * z_tilde + (1.0 - alpha) * z;
    ax = alpha * z_tilde + (1.0 - alpha) * ax;
    z = z_hat + y.cwiseQuotient(rho_rows);
    op.project(z);
    y += rho_rows.cwiseProduct(z_hat - z);

    const bool check = it % settings.check_interval == 0 || it == settings.max_iterations;
    const bool adapt = settings.adapt_interval > 0 && it % settings.adapt_interval == 0;
    if (!check && !adapt) continue;

    op.apply(theta, g, ax);
    op.apply_transpose(y, aty_theta, aty_g);
    const Vector px = problem.weights.cwiseProduct(theta);
    prim = (ax - z).norm();
    const double dual_theta = (px + problem.linear + aty_theta).squaredNorm();
    dual = std::sqrt(dual_theta + aty_g.squaredNorm());
    if (prim <= settings.eps_primal && dual <= settings.eps_dual) {
      result.converged = true;
      break;
    }
    if (adapt) {
      const double prim_scale = std::max({ax.norm(), z.norm(), 1e-12});
      const double dual_scale = std::max({px.norm(), std::sqrt(aty_theta.squaredNorm() + aty_g.squaredNorm()),
                                          problem.linear.norm(), 1e-12});
      const double ratio = std::sqrt((prim / prim_scale) / std::max(dual / dual_scale, 1e-300));
      const double proposed = std::clamp(rho * ratio, kRhoMin, kRhoMax);
      if (proposed > 5.0 * rho || proposed < 0.2 * rho) {
        rho = proposed;
        rho_rows = op.row_rho(rho);
        auto fresh = std::make_unique<SchurSystem>(problem, layout, op, rho_rows, sigma);
        if (fresh->ok()) {
          system = std::move(fresh);
          ++result.factorizations;
        }
      }
    }
  }

  result.iterations = std::min(it, settings.max_iterations);
  result.primal_residual = prim;
  result.dual_residual = dual;
  result.rho = rho;
  result.state.theta = theta;
  result.state.grads = g / op.scale();
  unstack(layout, z, result.state.pair_z, result.state.box_z, result.state.grad_z, result.state.ball_z);
  unstack(layout, y, result.state.pair_y, result.state.box_y, result.state.grad_y, result.state.ball_y);
  result.state.grad_z /= op.scale();
  result.state.grad_y *= op.scale();
  return result;
}

SplittingResult solve_interior(const SplittingProblem& problem, const InteriorSettings& settings,
                               const SplittingState* warm) {
  require(problem.design != nullptr, "interior problem has no design");
  require(!problem.gradient_radius && !problem.value_ball, "interior solver handles pair and box rows only");
  for (const PairConstraint& c : problem.pairs) require(!c.equality, "interior solver needs inequality pairs");
  Layout layout;
  layout.n = problem.n();
  layout.d = problem.dim();
  layout.pairs = static_cast<int>(problem.pairs.size());
  layout.boxes = static_cast<int>(problem.boxes.size());
  const int n = layout.n;
  const int d = layout.d;
  const int pairs = layout.pairs;
  const int boxes = layout.boxes;
  const Operator op(problem, layout);

  // Rows: pairs a.z <= 0, then theta_i <= upper and -theta_i <= -lower per box.
  const int m = pairs + 2 * boxes;
  Vector b = Vector::Zero(m);
  for (int k = 0; k < boxes; ++k) {
    const BoxConstraint& bc = problem.boxes[static_cast<std::size_t>(k)];
    b[pairs + k] = bc.upper;
    b[pairs + boxes + k] = -bc.lower;
  }
  auto rows_of = [&](const Vector& v, Vector& out) {  // A z from the operator's stacked form
    out.resize(m);
    out.head(pairs) = v.head(pairs);
    out.segment(pairs, boxes) = v.segment(pairs, boxes);
    out.tail(boxes) = -v.segment(pairs, boxes);
  };
  auto fold = [&](const Vector& r, Vector& out) {  // operator form of A^T r
    out.resize(pairs + boxes);
    out.head(pairs) = r.head(pairs);
    out.tail(boxes) = r.segment(pairs, boxes) - r.tail(boxes);
  };

  Vector theta = Vector::Zero(n);
  PointMatrix g = PointMatrix::Zero(n, d);
  if (warm != nullptr && warm->theta.size() == n && warm->grads.rows() == n && warm->grads.cols() == d) {
    theta = warm->theta;
    g = warm->grads * op.scale();
  }
  Vector v, az;
  op.apply(theta, g, v);
  rows_of(v, az);
  Vector slack = (b - az).cwiseMax(1.0);
  Vector lambda = Vector::Ones(m);

  SplittingResult result;
  result.rho = 0.0;
  const double scale = std::max(1.0, problem.linear.cwiseAbs().maxCoeff());
  Vector rp, rd_theta, folded, aty_theta, rhs_theta, dtheta, adz, dv, dlam, ds, dlam_aff, ds_aff, rc, dd;
  Vector res_theta, fix_theta;
  PointMatrix rd_g, aty_g, rhs_g, dg, res_g, fix_g;
  struct Iterate {
    Vector theta, slack, lambda;
    PointMatrix g;
    double primal = 0.0, dual = 0.0, merit = std::numeric_limits<double>::infinity();
  } best;
  double best_merit = std::numeric_limits<double>::infinity();
  int stalled = 0;
  int it = 0;
  for (it = 1; it <= settings.max_iterations; ++it) {
    op.apply(theta, g, v);
    rows_of(v, az);
    rp = az + slack - b;
    fold(lambda, folded);
    op.apply_transpose(folded, aty_theta, aty_g);
    rd_theta = problem.weights.cwiseProduct(theta) + problem.linear + aty_theta;
    rd_g = aty_g;
    const double mu = m > 0 ? lambda.dot(slack) / m : 0.0;
    result.primal_residual = rp.size() > 0 ? rp.cwiseAbs().maxCoeff() : 0.0;
    result.dual_residual = std::max(rd_theta.cwiseAbs().maxCoeff(), rd_g.size() > 0 ? rd_g.cwiseAbs().maxCoeff() : 0.0);
    const double merit = std::max({result.primal_residual, result.dual_residual, mu});
    if (merit < best.merit) best = {theta, slack, lambda, g, result.primal_residual, result.dual_residual, merit};
    if (merit <= settings.tolerance * scale) {
      result.converged = true;
      break;
    }
    if (merit < 0.5 * best_merit) {
      best_merit = merit;
      stalled = 0;
    } else if (++stalled >= settings.stall_iterations && merit <= settings.acceptable * scale) {
      result.converged = true;
      break;
    }

    dd = lambda.cwiseQuotient(slack).cwiseMax(kDiagonalMin).cwiseMin(kDiagonalMax);
    Vector rho_rows(pairs + boxes);
    rho_rows.head(pairs) = dd.head(pairs);
    rho_rows.tail(boxes) = dd.segment(pairs, boxes) + dd.tail(boxes);
    const SchurSystem system(problem, layout, op, rho_rows, settings.regularization);
    ++result.factorizations;
    if (!system.ok()) break;

    // Newton step for complementarity target lambda.s = rc; returns (dz, dlam, ds).
    auto direction = [&](const Vector& target) {
      folded.resize(pairs + boxes);
      fold(dd.cwiseProduct(rp) - target.cwiseQuotient(slack), folded);
      op.apply_transpose(folded, rhs_theta, rhs_g);
      rhs_theta = -rd_theta - rhs_theta;
      rhs_g = -rd_g - rhs_g;
      system.solve(rhs_theta, rhs_g, dtheta, dg);
      // Extreme D costs the factorization digits; recover them by refinement.
      for (int pass = 0; pass < kRefinePasses; ++pass) {
        op.apply(dtheta, dg, dv);
        dv = dv.cwiseProduct(rho_rows);
        op.apply_transpose(dv, res_theta, res_g);
        res_theta = rhs_theta - res_theta - (problem.weights.array() + settings.regularization).matrix().cwiseProduct(dtheta);
        res_g = rhs_g - res_g - settings.regularization * dg;
        system.solve(res_theta, res_g, fix_theta, fix_g);
        dtheta += fix_theta;
        dg += fix_g;
      }
      op.apply(dtheta, dg, dv);
      rows_of(dv, adz);
      dlam = dd.cwiseProduct(adz + rp) - target.cwiseQuotient(slack);
      ds = -rp - adz;
    };
    auto max_step = [](const Vector& x, const Vector& dx) {
      double a = 1.0;
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (dx[k] < 0.0) a = std::min(a, -x[k] / dx[k]);
      }
      return a;
    };

    direction(lambda.cwiseProduct(slack));
    const double a_aff = std::min(max_step(slack, ds), max_step(lambda, dlam));
    const double mu_aff = m > 0 ? (slack + a_aff * ds).dot(lambda + a_aff * dlam) / m : 0.0;
    const double centering = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;
    ds_aff = ds;
    dlam_aff = dlam;
    rc = lambda.cwiseProduct(slack) + ds_aff.cwiseProduct(dlam_aff) - Vector::Constant(m, centering * mu);
    direction(rc);
    const double step = std::min(1.0, kStepFraction * std::min(max_step(slack, ds), max_step(lambda, dlam)));
    theta += step * dtheta;
    g += step * dg;
    slack += step * ds;
    lambda += step * dlam;
  }

  result.iterations = std::min(it, settings.max_iterations);
  if (!result.converged && best.merit < std::numeric_limits<double>::infinity()) {
    // Ran out of iterations or lost the factorization: fall back to the best iterate.
    theta = best.theta;
    g = best.g;
    slack = best.slack;
    lambda = best.lambda;
    result.primal_residual = best.primal;
    result.dual_residual = best.dual;
    result.converged = best.merit <= settings.acceptable * scale;
  }
  result.complementarity = lambda.dot(slack);
  result.state.theta = theta;
  result.state.grads = g / op.scale();
  result.state.pair_z = -slack.head(pairs);
  result.state.pair_y = lambda.head(pairs);
  result.state.box_z.resize(boxes);
  result.state.box_y.resize(boxes);
  for (int k = 0; k < boxes; ++k) {
    result.state.box_z[k] = theta[problem.boxes[static_cast<std::size_t>(k)].i];
    result.state.box_y[k] = lambda[pairs + k] - lambda[pairs + boxes + k];
  }
  return result;
}

}  // namespace convexreg
