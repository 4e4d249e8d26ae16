#include "projlab/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"

namespace projlab {

double PointSet::delta() const { return dyadic(level); }

double PointSet::coordinate(std::size_t i, int axis) const {
  return std::ldexp(static_cast<double>(cells[i][static_cast<std::size_t>(axis)]), -level);
}

Vec3 PointSet::point(std::size_t i) const { return {coordinate(i, 0), coordinate(i, 1), coordinate(i, 2)}; }

PointSet make_point_set(int dim, int level, std::vector<Cell> cells, std::vector<double> weights,
                        double nominal_dim, double bound) {
  if (dim < 1 || dim > 3) fail(ErrorKind::Configuration, "ambient dimension must be 1, 2 or 3");
  if (level < 0 || level > 40) fail(ErrorKind::Domain, "lattice level out of range");
  if (!weights.empty() && weights.size() != cells.size()) {
    fail(ErrorKind::Configuration, "weights must match cells one to one");
  }
  if (cells.size() > kMaxCells) fail(ErrorKind::Capacity, "point set exceeds the 2^24 cell cap");

  PointSet p;
  p.dim = dim;
  p.level = level;
  p.nominal_dim = nominal_dim;
  p.bound = bound;

  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a] < cells[b]; });
  const double scale = std::ldexp(1.0, -level);
  for (const std::size_t i : order) {
    Cell cell = cells[i];
    for (int axis = dim; axis < 3; ++axis) cell[static_cast<std::size_t>(axis)] = 0;
    for (int axis = 0; axis < dim; ++axis) {
      if (std::abs(static_cast<double>(cell[static_cast<std::size_t>(axis)]) * scale) > bound * (1.0 + kSlack)) {
        fail(ErrorKind::Domain, "cell outside the point set domain");
      }
    }
    const double w = weights.empty() ? 0.0 : weights[i];
    if (!weights.empty() && !(w >= 0.0)) fail(ErrorKind::Numeric, "weights must be nonnegative");
    if (!p.cells.empty() && p.cells.back() == cell) {
      if (!weights.empty()) p.weights.back() += w;
      continue;
    }
    p.cells.push_back(cell);
    if (!weights.empty()) p.weights.push_back(w);
  }
  if (p.weighted()) {
    const double total = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-10) fail(ErrorKind::Numeric, "weights must sum to 1");
  }
  return p;
}

PointSet with_uniform_weights(PointSet p) {
  p.weights.assign(p.cells.size(), p.cells.empty() ? 0.0 : 1.0 / static_cast<double>(p.cells.size()));
  return p;
}

PointSet cantor_1d(double ratio, int depth) {
  if (depth < 1) fail(ErrorKind::Domain, "cantor depth must be at least 1");
  if (!(ratio > 0.0 && ratio <= 0.5)) fail(ErrorKind::Domain, "cantor ratio must lie in (0, 1/2]");
  if (depth > 24) fail(ErrorKind::Capacity, "cantor depth exceeds the 2^24 cell cap");
  const int level = static_cast<int>(std::lround(depth * std::log2(1.0 / ratio)));
  const double scale = std::ldexp(1.0, level);
  const std::size_t count = std::size_t{1} << depth;
  std::vector<Cell> cells;
  cells.reserve(count);
  for (std::size_t word = 0; word < count; ++word) {
    double x = 0.0;
    double step = 1.0 - ratio;
    for (int i = depth - 1; i >= 0; --i) {
      if ((word >> i) & 1U) x += step;
      step *= ratio;
    }
    cells.push_back({std::llround(x * scale), 0, 0});
  }
  auto p = make_point_set(1, level, std::move(cells), {}, std::log(2.0) / std::log(1.0 / ratio));
  return with_uniform_weights(std::move(p));
}

PointSet product_set(const PointSet& sx, const PointSet& sy, const PointSet& sz) {
  for (const PointSet* s : {&sx, &sy, &sz}) {
    if (s->dim != 1) fail(ErrorKind::Configuration, "product factors must be one-dimensional");
  }
  if (sx.level != sy.level || sx.level != sz.level) {
    fail(ErrorKind::Configuration, "product factors must share delta");
  }
  const std::size_t total = sx.size() * sy.size() * sz.size();
  if (total > kMaxCells) fail(ErrorKind::Capacity, "product exceeds the 2^24 cell cap");
  const std::int64_t shift = sx.level > 0 ? std::int64_t{1} << (sx.level - 1) : 0;
  std::vector<Cell> cells;
  cells.reserve(total);
  for (const auto& a : sx.cells) {
    for (const auto& b : sy.cells) {
      for (const auto& c : sz.cells) cells.push_back({a[0] - shift, b[0] - shift, c[0] - shift});
    }
  }
  auto p = make_point_set(3, sx.level, std::move(cells), {}, sx.nominal_dim + sy.nominal_dim + sz.nominal_dim);
  return with_uniform_weights(std::move(p));
}

double similarity_dimension(std::span<const SimilarityMap> maps) {
  if (maps.empty()) fail(ErrorKind::Configuration, "IFS needs at least one map");
  for (const auto& m : maps) {
    if (!(m.ratio > 0.0 && m.ratio < 1.0)) fail(ErrorKind::Configuration, "IFS map is not contracting");
  }
  auto pressure = [&](double s) {
    double sum = 0.0;
    for (const auto& m : maps) sum += std::pow(m.ratio, s);
    return sum;
  };
  if (pressure(0.0) <= 1.0) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (pressure(hi) > 1.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pressure(mid) > 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

PointSet ifs_attractor(std::span<const SimilarityMap> maps, int depth, double delta, int dim) {
  const double nominal = similarity_dimension(maps);
  const int level = level_of(delta);
  if (dim < 1 || dim > 3) fail(ErrorKind::Configuration, "ambient dimension must be 1, 2 or 3");
  if (depth < 0) fail(ErrorKind::Domain, "IFS depth must be nonnegative");
  double max_ratio = 0.0;
  for (const auto& m : maps) max_ratio = std::max(max_ratio, m.ratio);
  if (std::pow(max_ratio, depth) > delta * (1.0 + kSlack)) {
    fail(ErrorKind::Configuration, "IFS depth does not resolve below delta");
  }
  if (std::pow(static_cast<double>(maps.size()), depth) > static_cast<double>(kMaxCells)) {
    fail(ErrorKind::Capacity, "IFS compositions exceed the 2^24 cell cap");
  }

  std::vector<Vec3> points{Vec3{0, 0, 0}};
  for (int step = 0; step < depth; ++step) {
    std::vector<Vec3> next;
    next.reserve(points.size() * maps.size());
    for (const auto& m : maps) {
      const auto& r = m.rotation;
      for (const auto& x : points) {
        const Vec3 rx{r[0] * x[0] + r[1] * x[1] + r[2] * x[2], r[3] * x[0] + r[4] * x[1] + r[5] * x[2],
                      r[6] * x[0] + r[7] * x[1] + r[8] * x[2]};
        next.push_back(m.ratio * rx + m.translation);
      }
    }
    points = std::move(next);
  }

  const double scale = std::ldexp(1.0, level);
  std::vector<Cell> cells;
  cells.reserve(points.size());
  for (const auto& x : points) {
    Cell c{0, 0, 0};
    for (int axis = 0; axis < dim; ++axis) {
      const double v = x[static_cast<std::size_t>(axis)];
      if (std::abs(v) > 1.0 + kSlack) fail(ErrorKind::Configuration, "IFS attractor leaves the unit domain");
      c[static_cast<std::size_t>(axis)] = std::llround(v * scale);
    }
    cells.push_back(c);
  }
  auto p = make_point_set(dim, level, std::move(cells), {}, nominal);
  return with_uniform_weights(std::move(p));
}

namespace detail {

namespace {

// Inclusive prefix sums over the bounding box; used when the box is small.
WindowMax dense_window_max(const PointSet& p, std::span<const double> values, std::int64_t width,
                           const Cell& lo, const std::array<std::int64_t, 3>& extent) {
  const std::size_t ex = static_cast<std::size_t>(extent[0]);
  const std::size_t ey = static_cast<std::size_t>(extent[1]);
  const std::size_t ez = static_cast<std::size_t>(extent[2]);
  // One padding slot in front of every axis so that index 0 means "empty prefix".
  const std::size_t sx = ex + 1, sy = ey + 1, sz = ez + 1;
  std::vector<double> prefix(sx * sy * sz, 0.0);
  auto at = [&](std::size_t x, std::size_t y, std::size_t z) -> double& { return prefix[(x * sy + y) * sz + z]; };
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& c = p.cells[i];
    at(static_cast<std::size_t>(c[0] - lo[0]) + 1, static_cast<std::size_t>(c[1] - lo[1]) + 1,
       static_cast<std::size_t>(c[2] - lo[2]) + 1) += values[i];
  }
  for (std::size_t x = 1; x < sx; ++x)
    for (std::size_t y = 1; y < sy; ++y)
      for (std::size_t z = 1; z < sz; ++z)
        at(x, y, z) += at(x - 1, y, z) + at(x, y - 1, z) + at(x, y, z - 1) - at(x - 1, y - 1, z) -
                       at(x - 1, y, z - 1) - at(x, y - 1, z - 1) + at(x - 1, y - 1, z - 1);

  WindowMax best;
  const int dim = p.dim;
  auto upper = [&](std::size_t c, std::size_t e, int axis) {
    return axis < dim ? std::min(e, c + static_cast<std::size_t>(width) + 1) : c + 1;
  };
  for (std::size_t x = 0; x < ex; ++x) {
    const std::size_t x1 = upper(x, ex, 0);
    for (std::size_t y = 0; y < ey; ++y) {
      const std::size_t y1 = upper(y, ey, 1);
      for (std::size_t z = 0; z < ez; ++z) {
        const std::size_t z1 = upper(z, ez, 2);
        const double sum = at(x1, y1, z1) - at(x, y1, z1) - at(x1, y, z1) - at(x1, y1, z) + at(x, y, z1) +
                           at(x, y1, z) + at(x1, y, z) - at(x, y, z);
        if (sum > best.value * (1.0 + kSlack) + kSlack) {
          best.value = sum;
          best.corner = {lo[0] + static_cast<std::int64_t>(x), lo[1] + static_cast<std::int64_t>(y),
                         lo[2] + static_cast<std::int64_t>(z)};
        }
      }
    }
  }
  return best;
}

// Sweep over distinct left faces axis by axis; exhaustive without a dense grid.
void sparse_window_max(const PointSet& p, std::span<const double> values, std::int64_t width,
                       std::vector<std::size_t> members, int axis, Cell corner, WindowMax& best) {
  if (axis == p.dim) {
    double sum = 0.0;
    for (const std::size_t i : members) sum += values[i];
    if (sum > best.value * (1.0 + kSlack) + kSlack) best = {sum, corner};
    return;
  }
  const auto a = static_cast<std::size_t>(axis);
  std::sort(members.begin(), members.end(),
            [&](std::size_t i, std::size_t j) { return p.cells[i][a] < p.cells[j][a] || (p.cells[i][a] == p.cells[j][a] && i < j); });
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < members.size(); ++lo) {
    const std::int64_t left = p.cells[members[lo]][a];
    if (lo > 0 && p.cells[members[lo - 1]][a] == left) continue;
    hi = std::max(hi, lo);
    while (hi < members.size() && p.cells[members[hi]][a] <= left + width) ++hi;
    std::vector<std::size_t> slab(members.begin() + static_cast<std::ptrdiff_t>(lo),
                                  members.begin() + static_cast<std::ptrdiff_t>(hi));
    Cell next = corner;
    next[a] = left;
    sparse_window_max(p, values, width, std::move(slab), axis + 1, next, best);
  }
}

}  // namespace

WindowMax max_window_sum(const PointSet& p, std::span<const double> values, std::int64_t width) {
  if (p.cells.empty()) return {};
  Cell lo = p.cells.front();
  Cell hi = p.cells.front();
  for (const auto& c : p.cells) {
    for (std::size_t a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  std::array<std::int64_t, 3> extent{};
  double volume = 1.0;
  for (std::size_t a = 0; a < 3; ++a) {
    extent[a] = hi[a] - lo[a] + 1;
    volume *= static_cast<double>(extent[a] + 1);
  }
  if (volume <= static_cast<double>(std::size_t{1} << 24)) return dense_window_max(p, values, width, lo, extent);
  WindowMax best;
  std::vector<std::size_t> all(p.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  sparse_window_max(p, values, width, std::move(all), 0, Cell{0, 0, 0}, best);
  return best;
}

}  // namespace detail

namespace {

CubeWitness witness_of(const PointSet& p, const Cell& corner, std::int64_t width) {
  CubeWitness w;
  for (int a = 0; a < p.dim; ++a) {
    w.corner[static_cast<std::size_t>(a)] = std::ldexp(static_cast<double>(corner[static_cast<std::size_t>(a)]), -p.level);
  }
  w.side = std::ldexp(static_cast<double>(width), -p.level);
  return w;
}

}  // namespace

double default_validity_constant(int dim) { return std::ldexp(1.0, dim); }

DeltaSetReport validate_delta_s_set(const PointSet& p, double s, double constant) {
  DeltaSetReport report;
  const std::vector<double> ones(p.size(), 1.0);
  for (int m = 0; m <= p.level; ++m) {
    const std::int64_t width = std::int64_t{1} << m;
    const auto best = detail::max_window_sum(p, ones, width);
    const double ratio = best.value / std::exp2(m * s);
    if (ratio > report.worst_constant) {
      report.worst_constant = ratio;
      report.witness = witness_of(p, best.corner, width);
    }
  }
  const double threshold = constant > 0.0 ? constant : default_validity_constant(p.dim);
  report.valid = report.worst_constant <= threshold * (1.0 + kSlack);
  return report;
}

FrostmanReport frostman_check(const PointSet& p) {
  FrostmanReport report;
  std::vector<double> mass = p.weights;
  if (mass.empty()) mass.assign(p.size(), p.cells.empty() ? 0.0 : 1.0 / static_cast<double>(p.size()));
  for (int m = 0; m <= p.level; ++m) {
    const std::int64_t width = std::int64_t{1} << m;
    const auto best = detail::max_window_sum(p, mass, width);
    const double ratio = best.value / std::pow(std::ldexp(static_cast<double>(width), -p.level), p.nominal_dim);
    if (ratio > report.constant) {
      report.constant = ratio;
      report.witness = witness_of(p, best.corner, width);
    }
  }
  return report;
}

PointSet extract_delta_s_set(const PointSet& p, double s, double content_estimate) {
  if (!(s >= 0.0 && s <= p.dim)) fail(ErrorKind::Domain, "exponent s must lie in [0, ambient_dim]");
  if (!(content_estimate > 0.0)) fail(ErrorKind::Domain, "content estimate must be positive");
  const double required = content_estimate * std::exp2(p.level * s) / kExtractionSlackFactor;
  if (validate_delta_s_set(p, s).valid) {
    if (static_cast<double>(p.size()) < required * (1.0 - kSlack)) {
      fail(ErrorKind::Infeasible, "point set smaller than the requested content estimate allows");
    }
    return p;
  }

  const int n = p.level;
  auto key_at = [&](std::size_t i, int l) {
    Cell k{};
    for (std::size_t a = 0; a < 3; ++a) k[a] = ancestor(p.cells[i][a], n - l);
    return k;
  };
  // Order cells so that every dyadic cube at every level is a contiguous run.
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (int l = 0; l <= n; ++l) {
      const Cell ka = key_at(a, l), kb = key_at(b, l);
      if (ka != kb) return ka < kb;
    }
    return false;
  });

  auto mass_of = [&](std::size_t i) { return p.weighted() ? p.weights[i] : 1.0; };

  struct Node {
    std::size_t begin, end;
    std::int64_t achievable;
    double mass;
    Cell key;
    std::vector<Node> children;
  };

  std::function<Node(std::size_t, std::size_t, int)> build = [&](std::size_t begin, std::size_t end, int l) {
    Node node{begin, end, 0, 0.0, key_at(order[begin], l), {}};
    if (l == n) {
      node.achievable = 1;
      for (std::size_t i = begin; i < end; ++i) node.mass += mass_of(order[i]);
      return node;
    }
    std::size_t run = begin;
    while (run < end) {
      const Cell k = key_at(order[run], l + 1);
      std::size_t stop = run;
      while (stop < end && key_at(order[stop], l + 1) == k) ++stop;
      node.children.push_back(build(run, stop, l + 1));
      run = stop;
    }
    std::int64_t total = 0;
    for (const auto& c : node.children) {
      total += c.achievable;
      node.mass += c.mass;
    }
    node.achievable = std::min(total, counting_cap(n - l, s));
    std::sort(node.children.begin(), node.children.end(), [](const Node& a, const Node& b) {
      return a.mass > b.mass || (a.mass == b.mass && a.key < b.key);
    });
    return node;
  };

  std::vector<std::size_t> kept;
  std::function<void(const Node&, std::int64_t)> take = [&](const Node& node, std::int64_t quota) {
    if (node.children.empty()) {
      if (quota > 0) kept.push_back(order[node.begin]);
      return;
    }
    for (const auto& child : node.children) {
      if (quota <= 0) break;
      const std::int64_t share = std::min(quota, child.achievable);
      take(child, share);
      quota -= share;
    }
  };

  std::size_t run = 0;
  while (run < order.size()) {
    const Cell k = key_at(order[run], 0);
    std::size_t stop = run;
    while (stop < order.size() && key_at(order[stop], 0) == k) ++stop;
    const Node root = build(run, stop, 0);
    take(root, root.achievable);
    run = stop;
  }

  if (static_cast<double>(kept.size()) < required * (1.0 - kSlack)) {
    fail(ErrorKind::Infeasible,
         fmt::format("extraction kept {} cells, below kappa delta^-s / 64 = {}", kept.size(), required));
  }
  std::vector<Cell> cells;
  std::vector<double> weights;
  double total = 0.0;
  for (const std::size_t i : kept) {
    cells.push_back(p.cells[i]);
    if (p.weighted()) {
      weights.push_back(p.weights[i]);
      total += p.weights[i];
    }
  }
  if (p.weighted()) {
    if (total > 0.0) {
      for (auto& w : weights) w /= total;
    } else {
      weights.assign(weights.size(), 1.0 / static_cast<double>(weights.size()));
    }
  }
  return make_point_set(p.dim, p.level, std::move(cells), std::move(weights), s, p.bound);
}

PointSet random_delta_set(int dim, int level, double a, std::uint64_t seed, std::span<const Cell> roots) {
  if (dim < 1 || dim > 3) fail(ErrorKind::Configuration, "ambient dimension must be 1, 2 or 3");
  if (!(a >= 0.0 && a <= dim)) fail(ErrorKind::Domain, "exponent must lie in [0, ambient_dim]");
  Rng rng(seed);
  std::vector<Cell> cells;
  const int fan = 1 << dim;

  std::function<void(const Cell&, int, std::int64_t)> descend = [&](const Cell& node, int l, std::int64_t quota) {
    if (quota <= 0) return;
    if (l == level) {
      cells.push_back(node);
      return;
    }
    if (cells.size() + static_cast<std::size_t>(quota) > kMaxCells) {
      fail(ErrorKind::Capacity, "random set exceeds the 2^24 cell cap");
    }
    std::vector<int> children(static_cast<std::size_t>(fan));
    std::iota(children.begin(), children.end(), 0);
    rng.shuffle(children);
    const std::int64_t child_cap = counting_cap(level - l - 1, a);
    std::vector<std::int64_t> share(static_cast<std::size_t>(fan), 0);
    std::int64_t left = std::min(quota, child_cap * fan);
    // Round-robin fill keeps the split as even as the caps allow.
    const std::int64_t base = left / fan;
    for (auto& sh : share) sh = std::min(base, child_cap);
    left -= base * fan;
    for (std::size_t i = 0; left > 0; i = (i + 1) % share.size()) {
      if (share[i] < child_cap) {
        ++share[i];
        --left;
      }
    }
    for (std::size_t i = 0; i < share.size(); ++i) {
      Cell child = node;
      for (int axis = 0; axis < dim; ++axis) {
        child[static_cast<std::size_t>(axis)] = 2 * node[static_cast<std::size_t>(axis)] + ((children[i] >> axis) & 1);
      }
      descend(child, l + 1, share[i]);
    }
  };

  for (const auto& root : roots) descend(root, 0, counting_cap(level, a));
  double bound = 1.0;
  for (const auto& root : roots) {
    for (int axis = 0; axis < dim; ++axis) {
      bound = std::max(bound, std::abs(static_cast<double>(root[static_cast<std::size_t>(axis)])) + 1.0);
    }
  }
  return make_point_set(dim, level, std::move(cells), {}, a, bound);
}

void write_point_set_csv(std::ostream& out, const PointSet& p) {
  out << "dim,delta\n" << p.dim << ',' << fmt::format("{}", p.delta()) << '\n';
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int a = 0; a < p.dim; ++a) {
      if (a > 0) out << ',';
      out << fmt::format("{}", p.coordinate(i, a));
    }
    if (p.weighted()) out << ',' << fmt::format("{}", p.weights[i]);
    out << '\n';
  }
}

PointSet read_point_set_csv(std::istream& in, double nominal_dim) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim,delta", 0) != 0) {
    fail(ErrorKind::Configuration, "point set CSV must start with a dim,delta header");
  }
  if (!std::getline(in, line)) fail(ErrorKind::Configuration, "point set CSV is missing its dim,delta row");
  std::replace(line.begin(), line.end(), ',', ' ');
  std::istringstream head(line);
  int dim = 0;
  double delta = 0.0;
  if (!(head >> dim >> delta)) fail(ErrorKind::Configuration, "malformed dim,delta row");
  const int level = level_of(delta);
  const double scale = std::ldexp(1.0, level);
  std::vector<Cell> cells;
  std::vector<double> weights;
  bool any_weight = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::vector<double> fields;
    for (double v; row >> v;) fields.push_back(v);
    if (fields.size() != static_cast<std::size_t>(dim) && fields.size() != static_cast<std::size_t>(dim) + 1) {
      fail(ErrorKind::Configuration, "point set row has the wrong number of fields: " + line);
    }
    Cell c{0, 0, 0};
    for (int a = 0; a < dim; ++a) c[static_cast<std::size_t>(a)] = std::llround(fields[static_cast<std::size_t>(a)] * scale);
    cells.push_back(c);
    if (fields.size() > static_cast<std::size_t>(dim)) {
      any_weight = true;
      weights.push_back(fields.back());
    }
  }
  if (any_weight && weights.size() != cells.size()) fail(ErrorKind::Configuration, "weights missing on some rows");
  double bound = 1.0;
  for (const auto& c : cells) {
    for (int a = 0; a < dim; ++a) bound = std::max(bound, std::abs(static_cast<double>(c[static_cast<std::size_t>(a)])) / scale);
  }
  return make_point_set(dim, level, std::move(cells), std::move(weights), nominal_dim, bound);
}

}  // namespace projlab
