#include "projlab/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <Eigen/Sparse>

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"

namespace projlab {

namespace {

void check_parameter(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    fail(ErrorKind::Domain, "curve parameter outside [0, 1]: " + std::to_string(theta));
  }
}

bool finite(const Vec3& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }

// Not-a-knot cubic spline of one coordinate (natural end conditions would
// force gamma'' = 0 at the ends and make every tabulated curve degenerate
// there). Evaluation extrapolates with the end polynomials so finite
// differences may step past the table range.
class Spline {
 public:
  Spline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const auto n = static_cast<Eigen::Index>(x_.size());
    auto h = [&](Eigen::Index i) { return x_[static_cast<std::size_t>(i + 1)] - x_[static_cast<std::size_t>(i)]; };
    auto yv = [&](Eigen::Index i) { return y_[static_cast<std::size_t>(i)]; };
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    // Third derivative continuous across the second and the next-to-last knot.
    entries.emplace_back(0, 0, h(1));
    entries.emplace_back(0, 1, -(h(0) + h(1)));
    entries.emplace_back(0, 2, h(0));
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      entries.emplace_back(i, i - 1, h(i - 1) / 6.0);
      entries.emplace_back(i, i, (h(i - 1) + h(i)) / 3.0);
      entries.emplace_back(i, i + 1, h(i) / 6.0);
      rhs[i] = (yv(i + 1) - yv(i)) / h(i) - (yv(i) - yv(i - 1)) / h(i - 1);
    }
    entries.emplace_back(n - 1, n - 3, h(n - 2));
    entries.emplace_back(n - 1, n - 2, -(h(n - 3) + h(n - 2)));
    entries.emplace_back(n - 1, n - 1, h(n - 3));
    Eigen::SparseMatrix<double> system(n, n);
    system.setFromTriplets(entries.begin(), entries.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(system);
    if (solver.info() != Eigen::Success) fail(ErrorKind::Numeric, "spline system is singular");
    const Eigen::VectorXd m = solver.solve(rhs);
    m_.assign(m.data(), m.data() + n);
  }

  double operator()(double t) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

}  // namespace

Curve::Curve(std::string label, Map eval, Map d1, Map d2, double h, double h2)
    : label_(std::move(label)), eval_(std::move(eval)), d1_(std::move(d1)), d2_(std::move(d2)), h_(h), h2_(h2) {
  if (!eval_) fail(ErrorKind::Configuration, "curve needs an evaluation map");
}

Vec3 Curve::operator()(double theta) const {
  check_parameter(theta);
  return eval_(theta);
}

Vec3 Curve::derivative(double theta) const {
  check_parameter(theta);
  if (d1_) return d1_(theta);
  return (0.5 / h_) * (eval_(theta + h_) - eval_(theta - h_));
}

Vec3 Curve::second_derivative(double theta) const {
  check_parameter(theta);
  if (d2_) return d2_(theta);
  const Vec3 sum = eval_(theta + h2_) + eval_(theta - h2_);
  return (1.0 / (h2_ * h2_)) * (sum - 2.0 * eval_(theta));
}

Curve Curve::with_finite_differences() const { return Curve(label_ + "-fd", eval_, {}, {}, h_, h2_); }

Curve model_curve() {
  const double k = 1.0 / std::sqrt(2.0);
  return Curve(
      "model", [k](double t) { return Vec3{k * std::cos(t), k * std::sin(t), k}; },
      [k](double t) { return Vec3{-k * std::sin(t), k * std::cos(t), 0.0}; },
      [k](double t) { return Vec3{-k * std::cos(t), -k * std::sin(t), 0.0}; });
}

Curve helix_curve() {
  return Curve("helix", [](double t) { return normalized(Vec3{std::cos(t), std::sin(t), 1.0 + 0.2 * t}); });
}

Curve great_circle() {
  return Curve(
      "greatcircle", [](double t) { return Vec3{std::cos(t), std::sin(t), 0.0}; },
      [](double t) { return Vec3{-std::sin(t), std::cos(t), 0.0}; },
      [](double t) { return Vec3{-std::cos(t), -std::sin(t), 0.0}; });
}

Curve curve_from_table(std::span<const CurveTableRow> rows, std::string label) {
  if (rows.size() < 4) fail(ErrorKind::Configuration, "curve table needs at least 4 rows");
  std::vector<double> x;
  std::array<std::vector<double>, 3> y;
  for (const auto& row : rows) {
    if (!x.empty() && !(row.theta > x.back())) {
      fail(ErrorKind::Configuration, "curve table parameters must be strictly increasing");
    }
    if (!finite(row.point) || norm(row.point) == 0.0) fail(ErrorKind::Numeric, "curve table row is not a direction");
    x.push_back(row.theta);
    for (int c = 0; c < 3; ++c) y[c].push_back(row.point[c]);
  }
  if (x.front() > 0.0 || x.back() < 1.0) fail(ErrorKind::Configuration, "curve table must span [0, 1]");
  auto splines = std::make_shared<const std::array<Spline, 3>>(
      std::array<Spline, 3>{Spline(x, y[0]), Spline(x, y[1]), Spline(x, y[2])});
  return Curve(std::move(label), [splines](double t) {
    const auto& s = *splines;
    return normalized(Vec3{s[0](t), s[1](t), s[2](t)});
  });
}

Curve load_curve_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Configuration, "cannot open curve table " + path.string());
  std::vector<CurveTableRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    CurveTableRow row{};
    if (!(fields >> row.theta >> row.point[0] >> row.point[1] >> row.point[2])) {
      if (first) {
        first = false;
        continue;
      }
      fail(ErrorKind::Configuration, "malformed curve table row: " + line);
    }
    first = false;
    rows.push_back(row);
  }
  return curve_from_table(rows, path.stem().string());
}

Curve curve_by_name(const std::string& name) {
  if (name == "model") return model_curve();
  if (name == "helix") return helix_curve();
  if (name == "greatcircle") return great_circle();
  if (std::filesystem::exists(name)) return load_curve_table(name);
  fail(ErrorKind::Configuration, "unknown curve: " + name);
}

Vec3 eval_curve(const Curve& curve, double theta) { return curve(theta); }

double nondegeneracy_margin(const Curve& curve, int n_samples) {
  if (n_samples < 2) fail(ErrorKind::Range, "nondegeneracy_margin needs at least 2 samples");
  double margin = INFINITY;
  for (int i = 0; i < n_samples; ++i) {
    const double theta = static_cast<double>(i) / (n_samples - 1);
    const Vec3 g = curve(theta);
    const Vec3 g1 = curve.derivative(theta);
    const Vec3 g2 = curve.second_derivative(theta);
    if (!finite(g1) || !finite(g2)) fail(ErrorKind::Numeric, "non-finite curve derivative");
    margin = std::min(margin, std::abs(det3(g, g1, g2)));
  }
  return margin;
}

double DirectionNet::delta() const { return dyadic(level); }

namespace detail {

std::vector<std::int64_t> thin_grid(std::int64_t count, int levels, double t, std::uint64_t seed) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::int64_t last = (std::int64_t{1} << levels) - 1;
  std::vector<std::int64_t> caps(static_cast<std::size_t>(levels) + 1);
  for (int l = 0; l <= levels; ++l) caps[static_cast<std::size_t>(l)] = counting_cap(levels - l, t);
  // counts[l][bucket]; level l has 2^l buckets.
  std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(levels) + 1);
  for (int l = 0; l <= levels; ++l) counts[static_cast<std::size_t>(l)].assign(std::size_t{1} << l, 0);

  std::vector<std::int64_t> picked;
  for (const std::int64_t index : order) {
    const std::int64_t slot = std::min(index, last);
    bool admissible = true;
    for (int l = 0; l <= levels && admissible; ++l) {
      const auto bucket = static_cast<std::size_t>(slot >> (levels - l));
      admissible = counts[static_cast<std::size_t>(l)][bucket] < caps[static_cast<std::size_t>(l)];
    }
    if (!admissible) continue;
    for (int l = 0; l <= levels; ++l) ++counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(slot >> (levels - l))];
    picked.push_back(index);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

WindowWorst worst_window_1d(std::span<const std::int64_t> sorted, int levels, double t, bool closed) {
  WindowWorst worst;
  for (int m = 0; m <= levels; ++m) {
    const std::int64_t width = std::int64_t{1} << m;
    const std::int64_t reach = closed ? width : width - 1;
    const double scale = std::exp2(m * t);
    std::size_t hi = 0;
    for (std::size_t lo = 0; lo < sorted.size(); ++lo) {
      hi = std::max(hi, lo);
      while (hi < sorted.size() && sorted[hi] <= sorted[lo] + reach) ++hi;
      const double ratio = static_cast<double>(hi - lo) / scale;
      if (ratio > worst.ratio) worst = {ratio, sorted[lo], width};
    }
  }
  return worst;
}

}  // namespace detail

NetCheck check_net(std::span<const double> thetas, int level, double t) {
  std::vector<std::int64_t> indices;
  indices.reserve(thetas.size());
  const double scale = std::ldexp(1.0, level);
  for (const double theta : thetas) indices.push_back(std::llround(theta * scale));
  std::sort(indices.begin(), indices.end());
  const auto worst = detail::worst_window_1d(indices, level, t, true);
  return {worst.ratio, static_cast<double>(worst.start) / scale, static_cast<double>(worst.width) / scale};
}

DirectionNet direction_net(const Curve& /*curve*/, double delta, double t, std::uint64_t seed) {
  const int level = level_of(delta);
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::Domain, "net exponent t must lie in [0, 1]");
  const std::int64_t points = (std::int64_t{1} << level) + 1;

  std::vector<std::int64_t> indices;
  if (t == 1.0) {
    indices.resize(static_cast<std::size_t>(points));
    for (std::int64_t i = 0; i < points; ++i) indices[static_cast<std::size_t>(i)] = i;
  } else {
    indices = detail::thin_grid(points, level, t, seed);
  }

  DirectionNet net;
  net.level = level;
  net.t = t;
  net.thetas.reserve(indices.size());
  for (const auto i : indices) net.thetas.push_back(static_cast<double>(i) * delta);

  const double log_factor = level > 0 ? 1.0 / (static_cast<double>(level) * level) : 1.0;
  const double nominal = log_factor * std::exp2(level * t);
  net.cardinality_constant = static_cast<double>(net.size()) / nominal;
  if (static_cast<double>(net.size()) < nominal / 16.0) {
    fail(ErrorKind::Infeasible, "direction net too small for the requested (delta, t)");
  }
  net.constant = check_net(net.thetas, level, t).worst_constant;
  return net;
}

}  // namespace projlab
