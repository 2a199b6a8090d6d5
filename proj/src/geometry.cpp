#include "convexreg/geometry.hpp"

#include "convexreg/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace convexreg {

namespace {

constexpr long kMaxVertexCandidates = 200000;

// Advances `idx` (strictly increasing, values < limit) to the next combination.
bool next_combination(std::vector<int>& idx, int limit) {
  const int k = static_cast<int>(idx.size());
  for (int pos = k - 1; pos >= 0; --pos) {
    if (idx[pos] < limit - k + pos) {
      ++idx[pos];
      for (int q = pos + 1; q < k; ++q) idx[q] = idx[q - 1] + 1;
      return true;
    }
  }
  return false;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

bool inside(const std::vector<Slab>& slabs, const Vector& x, double tol) {
  for (const Slab& s : slabs) {
    const double p = s.normal.dot(x);
    if (p < s.lower - tol || p > s.upper + tol) return false;
  }
  return true;
}

PointMatrix enumerate_vertices(int dim, const std::vector<Slab>& slabs) {
  const int f = static_cast<int>(slabs.size());
  std::vector<std::vector<double>> found;
  std::vector<int> idx(dim);
  std::iota(idx.begin(), idx.end(), 0);
  Matrix a(dim, dim);
  Vector rhs(dim);
  do {
    for (int r = 0; r < dim; ++r) a.row(r) = slabs[idx[r]].normal.transpose();
    Eigen::FullPivLU<Matrix> lu(a);
    if (lu.rank() < dim) continue;
    for (unsigned mask = 0; mask < (1u << dim); ++mask) {
      for (int r = 0; r < dim; ++r) {
        rhs[r] = (mask >> r) & 1u ? slabs[idx[r]].upper : slabs[idx[r]].lower;
      }
      Vector x = lu.solve(rhs);
      if (!inside(slabs, x, 1e-9)) continue;
      bool dup = false;
      for (const auto& v : found) {
        double dist = 0.0;
        for (int c = 0; c < dim; ++c) dist = std::max(dist, std::abs(v[c] - x[c]));
        if (dist < 1e-10) {
          dup = true;
          break;
        }
      }
      if (!dup) found.emplace_back(x.data(), x.data() + dim);
    }
  } while (next_combination(idx, f));
  PointMatrix out(static_cast<Eigen::Index>(found.size()), dim);
  for (std::size_t r = 0; r < found.size(); ++r) {
    for (int c = 0; c < dim; ++c) out(static_cast<Eigen::Index>(r), c) = found[r][c];
  }
  return out;
}

// Circumradius of the parallelepiped cut out by `dim` independent slabs.
double parallelepiped_bound(int dim, const std::vector<Slab>& slabs) {
  const int f = static_cast<int>(slabs.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(dim);
  std::iota(idx.begin(), idx.end(), 0);
  int tried = 0;
  do {
    Matrix a(dim, dim);
    for (int r = 0; r < dim; ++r) a.row(r) = slabs[idx[r]].normal.transpose();
    Eigen::FullPivLU<Matrix> lu(a);
    if (lu.rank() < dim) continue;
    double worst = 0.0;
    Vector rhs(dim);
    for (unsigned mask = 0; mask < (1u << dim); ++mask) {
      for (int r = 0; r < dim; ++r) {
        rhs[r] = (mask >> r) & 1u ? slabs[idx[r]].upper : slabs[idx[r]].lower;
      }
      worst = std::max(worst, lu.solve(rhs).norm());
    }
    best = std::min(best, worst);
  } while (++tried < 5000 && next_combination(idx, f));
  return best;
}

}  // namespace

SlabPolytope::SlabPolytope(int dim, std::vector<Slab> slabs, double radius)
    : dim_(dim), slabs_(std::move(slabs)), radius_(radius) {
  require(dim_ >= 1, "polytope dimension must be positive");
  require(radius_ > 0.0 && std::isfinite(radius_), "bounding radius must be positive");
  require(!slabs_.empty(), "polytope needs at least one slab");
  Matrix normals(static_cast<Eigen::Index>(slabs_.size()), dim_);
  for (std::size_t i = 0; i < slabs_.size(); ++i) {
    const Slab& s = slabs_[i];
    require(s.normal.size() == dim_, "slab normal has wrong dimension");
    require(std::abs(s.normal.norm() - 1.0) <= 1e-12, "slab normal must be a unit vector");
    require(s.lower < s.upper, "slab requires lower < upper");
    normals.row(static_cast<Eigen::Index>(i)) = s.normal.transpose();
  }
  Eigen::FullPivLU<Matrix> lu(normals);
  require(lu.rank() == dim_, "slab normals do not span the space; polytope is unbounded");

  const int f = static_cast<int>(slabs_.size());
  const double candidates = binomial(f, dim_) * std::pow(2.0, dim_);
  box_lower_ = Vector::Constant(dim_, -radius_);
  box_upper_ = Vector::Constant(dim_, radius_);
  if (candidates <= kMaxVertexCandidates) {
    vertices_ = enumerate_vertices(dim_, slabs_);
    require(vertices_.rows() > 0, "slab system is empty");
    double far = 0.0;
    for (Eigen::Index r = 0; r < vertices_.rows(); ++r) far = std::max(far, vertices_.row(r).norm());
    require(far <= radius_ * (1.0 + 1e-12) + 1e-12,
            "polytope is not contained in the ball of the supplied radius");
    box_lower_ = vertices_.colwise().minCoeff().transpose();
    box_upper_ = vertices_.colwise().maxCoeff().transpose();
  } else {
    require(parallelepiped_bound(dim_, slabs_) <= radius_ * (1.0 + 1e-12),
            "cannot certify containment in the ball of the supplied radius");
    for (const Slab& s : slabs_) {
      for (int c = 0; c < dim_; ++c) {
        if (std::abs(std::abs(s.normal[c]) - 1.0) <= 1e-12) {
          const double lo = s.normal[c] > 0 ? s.lower : -s.upper;
          const double hi = s.normal[c] > 0 ? s.upper : -s.lower;
          box_lower_[c] = std::max(box_lower_[c], lo);
          box_upper_[c] = std::min(box_upper_[c], hi);
        }
      }
    }
  }
}

SlabPolytope SlabPolytope::unit_cube(int dim) {
  return box(Vector::Zero(dim), Vector::Ones(dim));
}

SlabPolytope SlabPolytope::box(const Vector& lower, const Vector& upper) {
  require(lower.size() == upper.size() && lower.size() > 0, "box bounds must match");
  const int d = static_cast<int>(lower.size());
  std::vector<Slab> slabs;
  double r2 = 0.0;
  for (int c = 0; c < d; ++c) {
    slabs.push_back({Vector::Unit(d, c), lower[c], upper[c]});
    const double m = std::max(std::abs(lower[c]), std::abs(upper[c]));
    r2 += m * m;
  }
  return SlabPolytope(d, std::move(slabs), std::sqrt(r2));
}

SlabPolytope SlabPolytope::regular_polygon(int slab_pairs, double inradius) {
  require(slab_pairs >= 2, "polygon needs at least two slab pairs");
  std::vector<Slab> slabs;
  const double pi = std::acos(-1.0);
  for (int k = 0; k < slab_pairs; ++k) {
    const double angle = pi * k / slab_pairs;
    Vector v(2);
    v << std::cos(angle), std::sin(angle);
    v.normalize();
    slabs.push_back({v, -inradius, inradius});
  }
  const double circumradius = inradius / std::cos(pi / (2.0 * slab_pairs));
  return SlabPolytope(2, std::move(slabs), circumradius * (1.0 + 1e-9));
}

bool SlabPolytope::contains(const Vector& x) const {
  require(x.size() == dim_, "point dimension does not match polytope");
  return inside(slabs_, x, kTolerance);
}

double SlabPolytope::max_side() const { return (box_upper_ - box_lower_).maxCoeff(); }

nlohmann::json SlabPolytope::to_json() const {
  nlohmann::json slabs = nlohmann::json::array();
  for (const Slab& s : slabs_) {
    slabs.push_back({{"v", std::vector<double>(s.normal.data(), s.normal.data() + dim_)},
                     {"a", s.lower},
                     {"b", s.upper}});
  }
  return {{"dim", dim_}, {"slabs", slabs}, {"radius", radius_}};
}

SlabPolytope SlabPolytope::from_json(const nlohmann::json& j) {
  const int dim = j.at("dim").get<int>();
  std::vector<Slab> slabs;
  for (const auto& s : j.at("slabs")) {
    const auto v = s.at("v").get<std::vector<double>>();
    require(static_cast<int>(v.size()) == dim, "slab normal length does not match dim");
    slabs.push_back({Eigen::Map<const Vector>(v.data(), dim), s.at("a").get<double>(),
                     s.at("b").get<double>()});
  }
  return SlabPolytope(dim, std::move(slabs), j.at("radius").get<double>());
}

bool contains(const SlabPolytope& poly, const Vector& x) { return poly.contains(x); }

GridDesign grid_points(const SlabPolytope& poly, double delta) {
  require(delta > 0.0 && std::isfinite(delta), "grid resolution must be positive");
  const int d = poly.dim();
  std::vector<long> lo(d), hi(d);
  for (int c = 0; c < d; ++c) {
    lo[c] = static_cast<long>(std::ceil(poly.box_lower()[c] / delta - 1e-9));
    hi[c] = static_cast<long>(std::floor(poly.box_upper()[c] / delta + 1e-9));
    if (hi[c] < lo[c]) throw GridTooCoarse("grid resolution too coarse: fewer than 2 points");
  }
  GridDesign grid;
  grid.delta = delta;
  std::vector<double> flat;
  std::vector<long> k = lo;
  Vector x(d);
  while (true) {
    for (int c = 0; c < d; ++c) x[c] = static_cast<double>(k[c]) * delta;
    if (poly.contains(x)) {
      flat.insert(flat.end(), x.data(), x.data() + d);
      grid.indices.push_back(k);
    }
    int c = d - 1;
    while (c >= 0 && k[c] == hi[c]) {
      k[c] = lo[c];
      --c;
    }
    if (c < 0) break;
    ++k[c];
  }
  const auto n = static_cast<Eigen::Index>(grid.indices.size());
  if (n < 2) throw GridTooCoarse("grid resolution too coarse: fewer than 2 points");
  grid.points = Eigen::Map<PointMatrix>(flat.data(), n, d);
  return grid;
}

GridDesign grid_with_at_least(const SlabPolytope& poly, int target_n) {
  require(target_n >= 2, "grid designs need at least two points");
  const double side = poly.max_side();
  for (int m = 1;; ++m) {
    try {
      GridDesign g = grid_points(poly, side / m);
      if (g.n() >= target_n) return g;
    } catch (const GridTooCoarse&) {
    }
    require(m < 1000000, "could not reach the requested grid size");
  }
}

RandomDesign sample_uniform(const SlabPolytope& poly, int n, std::uint64_t seed,
                            std::optional<long> max_attempts) {
  require(n >= 1, "sample size must be at least 1");
  const long budget = max_attempts.value_or(1000L * n);
  const int d = poly.dim();
  Rng rng(seed);
  std::vector<std::uniform_real_distribution<double>> axes;
  for (int c = 0; c < d; ++c) axes.emplace_back(poly.box_lower()[c], poly.box_upper()[c]);
  RandomDesign design;
  design.seed = seed;
  design.points.resize(n, d);
  Vector x(d);
  long attempts = 0;
  for (int i = 0; i < n;) {
    if (attempts++ >= budget) {
      std::ostringstream msg;
      msg << "rejection sampler exhausted " << budget << " attempts after " << i << " points";
      throw BudgetExhausted(msg.str());
    }
    for (int c = 0; c < d; ++c) x[c] = axes[c](rng);
    if (poly.contains(x)) design.points.row(i++) = x.transpose();
  }
  return design;
}

Vector AxisCube::lower() const {
  Vector v(static_cast<Eigen::Index>(index.size()));
  for (std::size_t c = 0; c < index.size(); ++c) v[static_cast<Eigen::Index>(c)] = index[c] * eta;
  return v;
}

Vector AxisCube::upper() const { return lower().array() + eta; }

std::vector<AxisCube> cube_cover(const SlabPolytope& poly, double eta, CoverMode mode) {
  require(eta > 0.0 && std::isfinite(eta), "cube side must be positive");
  const int d = poly.dim();
  const double tol = SlabPolytope::kTolerance;
  std::vector<long> lo(d), hi(d);
  for (int c = 0; c < d; ++c) {
    lo[c] = static_cast<long>(std::floor(poly.box_lower()[c] / eta)) - 1;
    hi[c] = static_cast<long>(std::floor(poly.box_upper()[c] / eta)) + 1;
  }
  std::vector<AxisCube> out;
  std::vector<long> k = lo;
  Vector corner(d);
  while (true) {
    AxisCube cube{k, eta};
    const Vector cl = cube.lower();
    const Vector cu = cube.upper();
    bool keep = true;
    if (mode == CoverMode::Interior) {
      for (unsigned mask = 0; keep && mask < (1u << d); ++mask) {
        for (int c = 0; c < d; ++c) corner[c] = (mask >> c) & 1u ? cu[c] : cl[c];
        keep = poly.contains(corner);
      }
    } else {
      // Separating-axis test over slab normals and coordinate axes.
      for (const Slab& s : poly.slabs()) {
        double pmin = 0.0, pmax = 0.0;
        for (int c = 0; c < d; ++c) {
          const double a = s.normal[c] * cl[c];
          const double b = s.normal[c] * cu[c];
          pmin += std::min(a, b);
          pmax += std::max(a, b);
        }
        if (pmax <= s.lower + tol || pmin >= s.upper - tol) {
          keep = false;
          break;
        }
      }
      for (int c = 0; keep && c < d; ++c) {
        if (cu[c] <= poly.box_lower()[c] + tol || cl[c] >= poly.box_upper()[c] - tol) keep = false;
      }
    }
    if (keep) out.push_back(std::move(cube));
    int c = d - 1;
    while (c >= 0 && k[c] == hi[c]) {
      k[c] = lo[c];
      --c;
    }
    if (c < 0) break;
    ++k[c];
  }
  return out;
}

PointMatrix cube_vertices(const std::vector<AxisCube>& cubes) {
  std::set<std::vector<long>> corners;
  int d = 0;
  double eta = 0.0;
  for (const AxisCube& cube : cubes) {
    d = static_cast<int>(cube.index.size());
    eta = cube.eta;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      std::vector<long> v = cube.index;
      for (int c = 0; c < d; ++c) v[c] += (mask >> c) & 1u;
      corners.insert(std::move(v));
    }
  }
  PointMatrix out(static_cast<Eigen::Index>(corners.size()), d);
  Eigen::Index r = 0;
  for (const auto& v : corners) {
    for (int c = 0; c < d; ++c) out(r, c) = static_cast<double>(v[c]) * eta;
    ++r;
  }
  return out;
}

}  // namespace convexreg
