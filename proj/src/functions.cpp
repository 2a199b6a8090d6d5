#include "convexreg/functions.hpp"

#include "convexreg/kernels.hpp"
#include "convexreg/seeding.hpp"

#include <algorithm>
#include <sstream>

namespace convexreg {

PiecewiseAffineConvex::PiecewiseAffineConvex(PointMatrix slopes, Vector intercepts)
    : slopes_(std::move(slopes)), intercepts_(std::move(intercepts)) {
  require(slopes_.rows() > 0, "piecewise affine function needs at least one piece");
  require(slopes_.cols() > 0, "piecewise affine function needs a positive dimension");
  require(slopes_.rows() == intercepts_.size(), "slope and intercept counts differ");
}

double PiecewiseAffineConvex::operator()(const Vector& x) const {
  require(x.size() == slopes_.cols(), "point dimension does not match function");
  return (slopes_ * x + intercepts_).maxCoeff();
}

Vector PiecewiseAffineConvex::evaluate(const PointMatrix& points) const {
  require(points.cols() == slopes_.cols(), "point dimension does not match function");
  Vector out;
  kernels::parallel::max_affine(slopes_, intercepts_, points, out);
  return out;
}

nlohmann::json PiecewiseAffineConvex::to_json() const {
  nlohmann::json pieces = nlohmann::json::array();
  for (Eigen::Index k = 0; k < slopes_.rows(); ++k) {
    std::vector<double> w(slopes_.row(k).data(), slopes_.row(k).data() + slopes_.cols());
    pieces.push_back({{"w", w}, {"b", intercepts_[k]}});
  }
  return {{"dim", dim()}, {"pieces", pieces}};
}

PiecewiseAffineConvex PiecewiseAffineConvex::from_json(const nlohmann::json& j) {
  const int d = j.at("dim").get<int>();
  const auto& pieces = j.at("pieces");
  require(pieces.is_array() && !pieces.empty(), "\"pieces\" must be a nonempty array");
  PointMatrix w(static_cast<Eigen::Index>(pieces.size()), d);
  Vector b(static_cast<Eigen::Index>(pieces.size()));
  Eigen::Index k = 0;
  for (const auto& piece : pieces) {
    const auto slope = piece.at("w").get<std::vector<double>>();
    require(static_cast<int>(slope.size()) == d, "piece slope length does not match dim");
    for (int c = 0; c < d; ++c) w(k, c) = slope[static_cast<std::size_t>(c)];
    b[k++] = piece.at("b").get<double>();
  }
  return PiecewiseAffineConvex(std::move(w), std::move(b));
}

double eval_pwa(const PiecewiseAffineConvex& f, const Vector& x) { return f(x); }

PiecewiseAffineConvex tangent_envelope(const PointMatrix& anchors) {
  require(anchors.rows() > 0, "tangent envelope needs at least one anchor");
  PointMatrix slopes = 2.0 * anchors;
  Vector intercepts = -anchors.rowwise().squaredNorm();
  return PiecewiseAffineConvex(std::move(slopes), std::move(intercepts));
}

namespace {

double lattice_step(const SlabPolytope& poly, int k) {
  require(k >= 1, "piece budget k must be at least 1");
  const double per_axis = std::pow(static_cast<double>(k), 1.0 / poly.dim());
  const double m = std::max(1.0, std::round(per_axis));
  return poly.max_side() / m;
}

}  // namespace

TangentEnvelope build_f_tilde(const SlabPolytope& poly, int k) {
  const double eta = lattice_step(poly, k);
  PointMatrix anchors;
  try {
    anchors = grid_points(poly, eta).points;
  } catch (const GridTooCoarse&) {
    anchors = cube_vertices(cube_cover(poly, eta, CoverMode::Intersecting));
  }
  require(anchors.rows() > 0, "no anchors available for this k");
  return {tangent_envelope(anchors), anchors, eta, std::nullopt};
}

TangentEnvelope build_f_tilde_interior(const SlabPolytope& poly, int k, int coverage_samples,
                                       std::uint64_t seed) {
  const double eta = lattice_step(poly, k);
  const auto cubes = cube_cover(poly, eta, CoverMode::Interior);
  require(!cubes.empty(), "no eta-cube fits inside the domain for this k");
  PointMatrix anchors = cube_vertices(cubes);
  const RandomDesign probe = sample_uniform(poly, coverage_samples, seed);
  long covered = 0;
  for (int p = 0; p < probe.n(); ++p) {
    for (const AxisCube& cube : cubes) {
      const Vector lo = cube.lower();
      const Vector x = probe.points.row(p).transpose();
      if (((x - lo).array() >= 0.0).all() && ((x - lo).array() <= eta).all()) {
        ++covered;
        break;
      }
    }
  }
  const double coverage = static_cast<double>(covered) / probe.n();
  return {tangent_envelope(anchors), anchors, eta, coverage};
}

double bump_value(const Vector& s, double delta, const Vector& x) {
  require(delta > 0.0, "bump scale must be positive");
  require(s.size() == x.size(), "bump centre and point dimensions differ");
  const double pi = std::acos(-1.0);
  double g = 0.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double u = (x[c] - s[c]) / delta;
    if (std::abs(u) > 0.5) return 0.0;
    const double cu = std::cos(pi * u);
    g += cu * cu * cu;
  }
  return delta * delta * g;
}

int hamming_distance(const Codeword& a, const Codeword& b) {
  require(a.size() == b.size(), "codewords have different lengths");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

std::vector<Codeword> varshamov_gilbert(int n, int min_hamming, int target_count, std::uint64_t seed,
                                        std::optional<long> attempt_budget) {
  require(n >= 1, "codeword length must be positive");
  require(min_hamming <= n, "minimum distance cannot exceed the codeword length");
  require(target_count >= 1, "target codeword count must be at least 1");
  const long budget = attempt_budget.value_or(1000L * target_count);
  Rng rng(seed);
  std::bernoulli_distribution bit(0.5);
  std::vector<Codeword> code;
  Codeword word(static_cast<std::size_t>(n));
  for (long attempt = 0; static_cast<int>(code.size()) < target_count; ++attempt) {
    if (attempt >= budget) {
      std::ostringstream msg;
      msg << "greedy code reached " << code.size() << " of " << target_count << " words in "
          << budget << " attempts";
      throw BudgetExhausted(msg.str());
    }
    for (auto& b : word) b = bit(rng) ? 1 : 0;
    const bool far = std::all_of(code.begin(), code.end(),
                                 [&](const Codeword& c) { return hamming_distance(c, word) >= min_hamming; });
    if (far) code.push_back(word);
  }
  return code;
}

BumpPacking::BumpPacking(GridDesign grid, std::vector<Codeword> codewords)
    : grid_(std::move(grid)), codewords_(std::move(codewords)) {
  require(!codewords_.empty(), "packing needs at least one codeword");
  const int n = grid_.n();
  for (const Codeword& c : codewords_) {
    require(static_cast<int>(c.size()) == n, "codeword length must equal the grid size");
  }
  for (std::size_t i = 0; i < codewords_.size(); ++i) {
    for (std::size_t j = i + 1; j < codewords_.size(); ++j) {
      require(4 * hamming_distance(codewords_[i], codewords_[j]) >= n,
              "codewords must be pairwise at Hamming distance >= n/4");
    }
  }
  for (int s = 0; s < n; ++s) lattice_.emplace(grid_.indices[static_cast<std::size_t>(s)], s);
}

BumpPacking BumpPacking::build(const SlabPolytope& poly, double delta, int codeword_count,
                               std::uint64_t seed) {
  GridDesign grid = grid_points(poly, delta);
  const int n = grid.n();
  auto code = varshamov_gilbert(n, (n + 3) / 4, codeword_count, seed);
  return BumpPacking(std::move(grid), std::move(code));
}

void BumpPacking::check_member(int member) const {
  if (member < 0 || member >= size()) {
    std::ostringstream msg;
    msg << "packing member index " << member << " out of range [0, " << size() << ")";
    throw std::out_of_range(msg.str());
  }
}

double BumpPacking::eval(int member, const Vector& x) const {
  check_member(member);
  const int d = static_cast<int>(grid_.points.cols());
  require(x.size() == d, "point dimension does not match packing");
  const double delta = grid_.delta;
  const Codeword& xi = codewords_[static_cast<std::size_t>(member)];
  // Only lattice cells within half a step of x can carry a bump at x.
  std::vector<long> lo(d), hi(d);
  for (int c = 0; c < d; ++c) {
    lo[c] = static_cast<long>(std::ceil(x[c] / delta - 0.5 - 1e-12));
    hi[c] = static_cast<long>(std::floor(x[c] / delta + 0.5 + 1e-12));
    if (hi[c] < lo[c]) return x.squaredNorm();
  }
  double bumps = 0.0;
  std::vector<long> k = lo;
  while (true) {
    const auto it = lattice_.find(k);
    if (it != lattice_.end() && xi[static_cast<std::size_t>(it->second)]) {
      bumps += bump_value(grid_.points.row(it->second).transpose(), delta, x);
    }
    int c = d - 1;
    while (c >= 0 && k[c] == hi[c]) {
      k[c] = lo[c];
      --c;
    }
    if (c < 0) break;
    ++k[c];
  }
  return x.squaredNorm() + kBumpCoefficient * bumps;
}

double BumpPacking::distance(int i, int j) const {
  check_member(i);
  check_member(j);
  const int n = grid_.n();
  const double d = static_cast<double>(grid_.points.cols());
  const double scale = 3.0 * d * grid_.delta * grid_.delta / (4.0 * std::sqrt(2.0) * std::acos(-1.0) * std::acos(-1.0));
  const int ham = hamming_distance(codewords_[static_cast<std::size_t>(i)], codewords_[static_cast<std::size_t>(j)]);
  return scale * std::sqrt(static_cast<double>(ham) / n);
}

double BumpPacking::separation_bound() const {
  const double d = static_cast<double>(grid_.points.cols());
  const double pi = std::acos(-1.0);
  return 3.0 * d * grid_.delta * grid_.delta / (8.0 * std::sqrt(2.0) * pi * pi);
}

double eval_packing_member(const BumpPacking& p, int member, const Vector& x) { return p.eval(member, x); }

double packing_distance(const BumpPacking& p, int i, int j) { return p.distance(i, j); }

}  // namespace convexreg
