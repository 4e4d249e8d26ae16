#include "projlab/projection.hpp"

#include <algorithm>
#include <cmath>

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

namespace {

void require_3d(const PointSet& a) {
  if (a.dim != 3) fail(ErrorKind::Configuration, "projections need a 3-D point set");
}

std::int64_t snap(double v, double scale) { return static_cast<std::int64_t>(std::floor(v * scale + 0.5)); }

}  // namespace

PointSet project_line(const PointSet& a, const Curve& curve, double theta) {
  require_3d(a);
  const Vec3 g = curve(theta);
  const double scale = std::ldexp(1.0, a.level);
  std::vector<Cell> cells;
  cells.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) cells.push_back({snap(dot(a.point(i), g), scale), 0, 0});
  return make_point_set(1, a.level, std::move(cells), a.weights, std::min(1.0, a.nominal_dim),
                        a.bound * std::sqrt(3.0));
}

PlaneFrame plane_frame(const Curve& curve, double theta) {
  const Vec3 g = curve(theta);
  const Vec3 d = curve.derivative(theta);
  const Vec3 normal_part = d - dot(d, g) * g;
  if (!(norm(normal_part) > 0.0)) fail(ErrorKind::Geometry, "curve derivative vanishes; no plane frame");
  const Vec3 e1 = normalized(normal_part);
  return {e1, cross(g, e1)};
}

std::array<double, 2> plane_coordinates(const PlaneFrame& frame, const Vec3& x) {
  return {dot(x, frame.e1), dot(x, frame.e2)};
}

PointSet project_plane(const PointSet& a, const Curve& curve, double theta) {
  require_3d(a);
  const PlaneFrame frame = plane_frame(curve, theta);
  const double scale = std::ldexp(1.0, a.level);
  std::vector<Cell> cells;
  cells.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto uv = plane_coordinates(frame, a.point(i));
    cells.push_back({snap(uv[0], scale), snap(uv[1], scale), 0});
  }
  return make_point_set(2, a.level, std::move(cells), a.weights, std::min(2.0, a.nominal_dim),
                        a.bound * std::sqrt(3.0));
}

DimensionFit box_dimension(const PointSet& p, double r_min, double r_max) {
  if (!(r_min >= p.delta() * (1.0 - kSlack)) || !(r_max <= 1.0 * (1.0 + kSlack)) || !(r_min <= r_max)) {
    fail(ErrorKind::Range, "box-counting range must satisfy delta <= r_min <= r_max <= 1");
  }
  DimensionFit fit;
  std::vector<double> xs, ys;
  std::vector<Cell> keys(p.size());
  for (int l = 0; l <= p.level; ++l) {
    const double r = dyadic(l);
    if (r < r_min * (1.0 - kSlack) || r > r_max * (1.0 + kSlack)) continue;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& c = p.cells[i];
      const int shift = p.level - l;
      keys[i] = {ancestor(c[0], shift), ancestor(c[1], shift), ancestor(c[2], shift)};
    }
    std::sort(keys.begin(), keys.end());
    const auto count = static_cast<std::int64_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
    fit.scales.push_back(r);
    fit.counts.push_back(count);
    xs.push_back(l);
    ys.push_back(std::log2(static_cast<double>(std::max<std::int64_t>(count, 1))));
  }
  if (xs.size() < 3) fail(ErrorKind::Range, "box dimension needs at least 3 dyadic scales in range");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

ScaleSelection select_scale(const Covering& cover, const PointSet& projected) {
  if (projected.dim != cover.dim) fail(ErrorKind::Configuration, "covering and point set dimensions differ");
  ScaleSelection out;
  out.masses.assign(cover.cubes.size(), 0.0);
  const double uniform = projected.size() > 0 ? 1.0 / static_cast<double>(projected.size()) : 0.0;
  std::vector<std::vector<Cell>> sorted = cover.cubes;
  for (auto& level : sorted) std::sort(level.begin(), level.end());
  for (std::size_t i = 0; i < projected.size(); ++i) {
    bool found = false;
    for (std::size_t k = 0; k < sorted.size() && !found; ++k) {
      if (std::binary_search(sorted[k].begin(), sorted[k].end(), cube_of(projected, i, static_cast<int>(k)))) {
        out.masses[k] += projected.weighted() ? projected.weights[i] : uniform;
        found = true;
      }
    }
    if (!found) fail(ErrorKind::Inconsistency, "covering does not cover the projection");
  }
  for (std::size_t j = 1; j < out.masses.size(); ++j) {
    const double jj = static_cast<double>(j);
    if (out.masses[j] >= 1.0 / (10.0 * jj * jj)) {
      out.level = static_cast<int>(j);
      return out;
    }
  }
  fail(ErrorKind::Inconsistency, "no covering level captures mass 1/(10 j^2)");
}

double exceptional_bound(double s, double alpha) { return std::max(0.0, 1.0 + (s - alpha) / 2.0); }

SweepResult exceptional_sweep(const PointSet& a, const Curve& curve, double s, int theta_grid, double margin,
                              unsigned threads) {
  require_3d(a);
  if (theta_grid < 1) fail(ErrorKind::Range, "theta_grid must be at least 1");
  const double r_min = 4.0 * a.delta();
  const double r_max = 0.25;
  SweepResult result;
  result.rows.resize(static_cast<std::size_t>(theta_grid));
  parallel_for(result.rows.size(), threads, [&](std::size_t i) {
    const double theta = theta_grid > 1 ? static_cast<double>(i) / (theta_grid - 1) : 0.0;
    const auto fit = box_dimension(project_line(a, curve, theta), r_min, r_max);
    result.rows[i] = {theta, fit.slope, fit.r2, fit.slope < s - margin};
  });

  auto& summary = result.summary;
  summary.s = s;
  summary.alpha = a.nominal_dim;
  summary.bound = exceptional_bound(s, a.nominal_dim);
  std::vector<Cell> exceptional;
  const int lattice = theta_grid > 1 ? static_cast<int>(std::floor(std::log2(theta_grid - 1))) : 0;
  for (const auto& row : result.rows) {
    if (row.below_s) exceptional.push_back({snap(row.theta, std::ldexp(1.0, lattice)), 0, 0});
  }
  summary.exceptional_fraction = static_cast<double>(exceptional.size()) / theta_grid;
  if (!exceptional.empty() && lattice >= 6) {
    const auto theta_set = make_point_set(1, lattice, std::move(exceptional), {}, 0.0);
    summary.exceptional_dim_fit = box_dimension(theta_set, 4.0 * theta_set.delta(), 0.25);
  }
  return result;
}

}  // namespace projlab
