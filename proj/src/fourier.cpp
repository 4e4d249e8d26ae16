#include "projlab/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <fftw3.h>
#include <fmt/format.h>

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are cached per (n, sign) for the life of the process.
class PlanCache {
 public:
  static fftw_plan get(int n, int sign) {
    static PlanCache cache;
    std::lock_guard lock(cache.mutex_);
    auto& plan = cache.plans_[{n, sign}];
    if (plan == nullptr) {
      const std::size_t count = static_cast<std::size_t>(n) * n * n;
      auto* in = fftw_alloc_complex(count);
      auto* out = fftw_alloc_complex(count);
      plan = fftw_plan_dft_3d(n, n, n, in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
      fftw_free(in);
      fftw_free(out);
      if (plan == nullptr) fail(ErrorKind::Numeric, "FFTW could not build a plan");
    }
    return plan;
  }

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

void transform(const std::vector<Complex>& in, std::vector<Complex>& out, int n, int sign) {
  out.resize(in.size());
  // The plan never writes its input for out-of-place complex transforms.
  fftw_execute_dft(PlanCache::get(n, sign), reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void check_grid(int n) {
  if (n < 2 || (n & (n - 1)) != 0) fail(ErrorKind::Configuration, "grid side must be a power of two");
  if (n > 256) fail(ErrorKind::Capacity, "grid side above 256");
}

double raised_cosine_down(double x) {
  // 1 at x <= 0, 0 at x >= 1.
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

}  // namespace

GridFunction GridFunction::zeros(int n, double spacing) {
  check_grid(n);
  GridFunction f;
  f.n = n;
  f.spacing = spacing;
  f.samples.assign(static_cast<std::size_t>(n) * n * n, Complex{});
  return f;
}

std::size_t Spectrum::index(std::int64_t kx, std::int64_t ky, std::int64_t kz) const {
  auto wrap = [this](std::int64_t k) { return static_cast<std::size_t>(((k % n) + n) % n); };
  return (wrap(kx) * static_cast<std::size_t>(n) + wrap(ky)) * static_cast<std::size_t>(n) + wrap(kz);
}

std::array<std::int64_t, 3> Spectrum::wave_numbers(std::size_t i) const {
  const auto un = static_cast<std::size_t>(n);
  auto sign = [this](std::size_t k) {
    const auto v = static_cast<std::int64_t>(k);
    return v >= n / 2 ? v - n : v;
  };
  return {sign(i / (un * un)), sign((i / un) % un), sign(i % un)};
}

Spectrum spectrum(const GridFunction& f) {
  check_grid(f.n);
  Spectrum c;
  c.n = f.n;
  c.length = f.length();
  transform(f.samples, c.coefficients, f.n, FFTW_FORWARD);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (auto& v : c.coefficients) v *= scale;
  return c;
}

GridFunction synthesize(const Spectrum& c, double spacing) {
  check_grid(c.n);
  GridFunction f;
  f.n = c.n;
  f.spacing = spacing;
  transform(c.coefficients, f.samples, c.n, FFTW_BACKWARD);
  return f;
}

double parseval_error(const GridFunction& f) {
  const Spectrum c = spectrum(f);
  double physical = 0.0, frequency = 0.0;
  for (const auto& v : f.samples) physical += std::norm(v);
  for (const auto& v : c.coefficients) frequency += std::norm(v);
  frequency *= static_cast<double>(f.size());
  if (physical == 0.0) return frequency == 0.0 ? 0.0 : INFINITY;
  return std::abs(physical - frequency) / physical;
}

double l4_norm(const GridFunction& g) {
  double total = 0.0;
  for (const auto& v : g.samples) {
    const double a = std::norm(v);
    total += a * a;
  }
  return total;
}

double max_abs(const GridFunction& g) {
  double m = 0.0;
  for (const auto& v : g.samples) m = std::max(m, std::abs(v));
  return m;
}

double max_difference(const GridFunction& a, const GridFunction& b) {
  if (a.n != b.n) fail(ErrorKind::Configuration, "grid sizes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.samples[i] - b.samples[i]));
  return m;
}

double ConeGeometry::delta() const { return dyadic(level); }

std::vector<int> ConeGeometry::sigmas_in_tau(int m, int tau) const {
  std::vector<int> out;
  for (int sigma = 0; sigma < sigma_count(); ++sigma) {
    if (tau_of_sigma(sigma, m) == tau) out.push_back(sigma);
  }
  return out;
}

std::array<Vec3, 3> ConeGeometry::tau_frame(int m, int tau) const {
  const double s = dyadic(m);
  const double theta = std::min(1.0, (tau + 0.5) * s);
  const Vec3 e_r = curve(theta);
  const Vec3 d = curve.derivative(theta);
  const Vec3 e_t = normalized(d - dot(d, e_r) * e_r);
  return {e_r, e_t, cross(e_r, e_t)};
}

namespace {

struct ConeSearch {
  const Curve& curve;
  std::vector<double> thetas;
  std::vector<Vec3> table;
  double step = 0.0;
  double speed = 0.0;

  explicit ConeSearch(const Curve& c, int samples) : curve(c) {
    step = 1.0 / (samples - 1);
    for (int i = 0; i < samples; ++i) {
      const double th = i * step;
      thetas.push_back(th);
      table.push_back(curve(th));
      speed = std::max(speed, norm(curve.derivative(th)));
    }
  }

  // Maximizer of xi . gamma over [0, 1]; returns (theta*, rho).
  std::pair<double, double> best(const Vec3& xi) const {
    std::size_t arg = 0;
    double top = -INFINITY;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double v = dot(xi, table[i]);
      if (v > top) {
        top = v;
        arg = i;
      }
    }
    double lo = std::max(0.0, thetas[arg] - step);
    double hi = std::min(1.0, thetas[arg] + step);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - ratio * (hi - lo), b = lo + ratio * (hi - lo);
    double fa = dot(xi, curve(a)), fb = dot(xi, curve(b));
    for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
      if (fa < fb) {
        lo = a;
        a = b;
        fa = fb;
        b = lo + ratio * (hi - lo);
        fb = dot(xi, curve(b));
      } else {
        hi = b;
        b = a;
        fb = fa;
        a = hi - ratio * (hi - lo);
        fa = dot(xi, curve(a));
      }
    }
    double theta = 0.5 * (lo + hi);
    double rho = dot(xi, curve(theta));
    for (const double end : {0.0, 1.0}) {
      const double v = dot(xi, curve(end));
      if (v > rho) {
        rho = v;
        theta = end;
      }
    }
    if (top > rho) {
      rho = top;
      theta = thetas[arg];
    }
    return {theta, rho};
  }
};

double line_distance_sq(const Vec3& xi, const Vec3& direction) {
  const double along = dot(xi, direction);
  return std::max(0.0, dot(xi, xi) - along * along);
}

}  // namespace

ConeGeometry build_geometry(const Curve& curve, double delta, double radial_floor, unsigned threads) {
  ConeGeometry g;
  g.curve = curve;
  g.level = level_of(delta);
  if (g.level < 1) fail(ErrorKind::Domain, "cone geometry needs delta <= 1/2");
  if (g.level > 7) fail(ErrorKind::Capacity, "cone geometry limited to 1/delta <= 128");
  const int floor_level = level_of(radial_floor);
  if (floor_level < 1) fail(ErrorKind::Domain, "radial floor must be 1/2 or 1/K");
  g.radial_floor = radial_floor;
  g.shells = floor_level;
  if (nondegeneracy_margin(curve, 4096) <= 0.0) {
    fail(ErrorKind::Geometry, "degenerate curve: plank frames need det(gamma, gamma', gamma'') != 0");
  }
  g.sigma_level = (g.level + 1) / 2;
  g.tau_levels = g.level / 2 + 1;

  const int M = g.M();
  const int n = g.grid();
  const ConeSearch search(curve, 4 * M + 1);
  const double lo_sq = radial_floor * radial_floor * (1.0 - kSlack);
  const double hi_sq = 1.0 + delta * delta + kSlack;
  const double delta_sq = delta * delta * (1.0 + kSlack);

  const auto un = static_cast<std::size_t>(n);
  g.cap_of_point.assign(un * un * un, -1);
  std::vector<int> slab_overlap(un, 0);
  Spectrum layout;
  layout.n = n;
  parallel_for(un, threads, [&](std::size_t ix) {
    for (std::size_t iy = 0; iy < un; ++iy) {
      for (std::size_t iz = 0; iz < un; ++iz) {
        const std::size_t i = (ix * un + iy) * un + iz;
        const auto k = layout.wave_numbers(i);
        const Vec3 xi{k[0] * delta, k[1] * delta, k[2] * delta};
        const double mag_sq = dot(xi, xi);
        if (mag_sq < lo_sq || mag_sq > hi_sq) continue;
        const auto [theta, rho] = search.best(xi);
        if (rho < radial_floor * (1.0 - kSlack) || rho > 1.0 + kSlack) continue;
        if (mag_sq - rho * rho > delta_sq) continue;
        const int direction = std::min(M - 1, static_cast<int>(std::floor(theta * M)));
        int shell = static_cast<int>(std::floor(-std::log2(rho)));
        shell = std::clamp(shell, 0, g.shells - 1);
        g.cap_of_point[i] = shell * M + direction;

        int overlap = 0;
        for (int j = std::max(0, direction - 3); j <= std::min(M - 1, direction + 3); ++j) {
          const double nearest = std::clamp(theta, j * delta, (j + 1) * delta);
          overlap += line_distance_sq(xi, curve(nearest)) <= delta_sq;
        }
        slab_overlap[ix] = std::max(slab_overlap[ix], overlap);
      }
    }
  });
  g.points_per_cap.assign(static_cast<std::size_t>(g.cap_count()), 0);
  for (const auto cap : g.cap_of_point) {
    if (cap >= 0) ++g.points_per_cap[static_cast<std::size_t>(cap)];
  }
  g.max_overlap = *std::max_element(slab_overlap.begin(), slab_overlap.end());
  return g;
}

nlohmann::json geometry_to_json(const ConeGeometry& g) {
  const double delta = g.delta();
  auto corners = [&](double t0, double t1, double r0, double r1) {
    nlohmann::json out = nlohmann::json::array();
    for (const double t : {t0, t1}) {
      for (const double r : {r0, r1}) {
        const Vec3 p = r * g.curve(std::min(1.0, t));
        out.push_back({p[0], p[1], p[2]});
      }
    }
    return out;
  };
  nlohmann::json caps = nlohmann::json::array();
  for (int cap = 0; cap < g.cap_count(); ++cap) {
    const int shell = cap / g.M();
    const int d = g.direction_of_cap(cap);
    const double r1 = std::ldexp(1.0, -shell);
    const double r0 = shell == g.shells - 1 ? g.radial_floor : r1 / 2;
    caps.push_back({{"id", cap},
                    {"direction", d},
                    {"shell", shell},
                    {"theta", {d * delta, (d + 1) * delta}},
                    {"radial", {r0, r1}},
                    {"points", g.points_per_cap[static_cast<std::size_t>(cap)]},
                    {"sigma", g.sigma_of_cap(cap)},
                    {"corners", corners(d * delta, (d + 1) * delta, r0, r1)}});
  }
  nlohmann::json sigmas = nlohmann::json::array();
  const double width = std::ldexp(1.0, -g.sigma_level);
  for (int sigma = 0; sigma < g.sigma_count(); ++sigma) {
    nlohmann::json taus = nlohmann::json::array();
    for (int m = 0; m < g.tau_levels; ++m) taus.push_back(g.tau_of_sigma(sigma, m));
    sigmas.push_back({{"id", sigma},
                      {"theta", {sigma * width, (sigma + 1) * width}},
                      {"tau", std::move(taus)},
                      {"corners", corners(sigma * width, (sigma + 1) * width, g.radial_floor, 1.0)}});
  }
  nlohmann::json taus = nlohmann::json::array();
  for (int m = 0; m < g.tau_levels; ++m) {
    const double s = dyadic(m);
    for (int tau = 0; tau < g.tau_count(m); ++tau) {
      const auto frame = g.tau_frame(m, tau);
      taus.push_back({{"s", s},
                      {"id", tau},
                      {"theta", {tau * s, (tau + 1) * s}},
                      {"sigmas", g.sigmas_in_tau(m, tau)},
                      {"frame", {{frame[0][0], frame[0][1], frame[0][2]},
                                 {frame[1][0], frame[1][1], frame[1][2]},
                                 {frame[2][0], frame[2][1], frame[2][2]}}},
                      {"envelope_box", {g.M(), g.M() * s, g.M() * s * s}},
                      {"corners", corners(tau * s, (tau + 1) * s, g.radial_floor, 1.0)}});
    }
  }
  return {{"delta", delta},
          {"radial_floor", g.radial_floor},
          {"curve", g.curve.label()},
          {"grid", g.grid()},
          {"max_overlap", g.max_overlap},
          {"caps", std::move(caps)},
          {"sigma_planks", std::move(sigmas)},
          {"tau_planks", std::move(taus)}};
}

bool in_tube(const ConeGeometry& g, double theta, const std::array<std::int64_t, 3>& k) {
  const double delta = g.delta();
  const Vec3 xi{k[0] * delta, k[1] * delta, k[2] * delta};
  const Vec3 direction = g.curve(theta);
  return std::abs(dot(xi, direction)) <= 1.0 + kSlack && line_distance_sq(xi, direction) <= delta * delta * (1.0 + kSlack);
}

double tube_window(double u) { return raised_cosine_down((std::abs(u) - 0.5) / 0.5); }

namespace {

void require_tube(const ConeGeometry& g, double theta) {
  const double scaled = theta * g.M();
  if (!(theta >= 0.0 && theta <= 1.0) || scaled != std::floor(scaled)) {
    fail(ErrorKind::Configuration, fmt::format("no tube for theta = {} (not a multiple of delta)", theta));
  }
}

}  // namespace

GridFunction synth_tube_function(const SlabFamily& family, const ConeGeometry& g) {
  require_tube(g, family.theta);
  const double M = g.M();
  for (const auto& slab : family.slabs) {
    if (slab.extent != M) fail(ErrorKind::Configuration, "tube functions need a rescaled slab family");
  }
  Spectrum c;
  c.n = g.grid();
  c.length = M;
  c.coefficients.assign(g.cap_of_point.size(), Complex{});
  const Vec3 direction = g.curve(family.theta);
  const double delta = g.delta();
  double total = 0.0;
  for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
    const auto k = c.wave_numbers(i);
    if (!in_tube(g, family.theta, k)) continue;
    const double u = (k[0] * direction[0] + k[1] * direction[1] + k[2] * direction[2]) * delta;
    const double w = tube_window(u);
    total += w;
    Complex sum{};
    for (const auto& slab : family.slabs) sum += std::polar(1.0, -kTwoPi * slab.offset * u);
    c.coefficients[i] = w * sum;
  }
  if (total > 0.0) {
    for (auto& v : c.coefficients) v /= total;
  }
  return synthesize(c, g.spacing());
}

TubeProfile tube_profile(const GridFunction& f, const SlabFamily& family, const ConeGeometry& g) {
  if (f.n != g.grid()) fail(ErrorKind::Configuration, "function grid does not match the geometry");
  const Vec3 direction = g.curve(family.theta);
  const double M = g.M();
  const auto un = static_cast<std::size_t>(f.n);
  TubeProfile p;
  p.core_min = INFINITY;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Vec3 x{f.spacing * static_cast<double>(i / (un * un)), f.spacing * static_cast<double>((i / un) % un),
           f.spacing * static_cast<double>(i % un)};
    for (auto& v : x) {
      if (v >= M / 2) v -= M;
    }
    const double along = dot(x, direction);
    if (line_distance_sq(x, direction) > M * M / 64) continue;
    double nearest = INFINITY;
    for (const auto& slab : family.slabs) nearest = std::min(nearest, std::abs(along - slab.offset));
    const double value = std::abs(f.samples[i]);
    if (nearest <= 0.25) p.core_min = std::min(p.core_min, value);
    if (nearest >= 4.0) p.off_max = std::max(p.off_max, value);
  }
  if (family.slabs.empty()) p.core_min = 0.0;
  return p;
}

KChoice choose_K(double delta, double s) {
  const int level = level_of(delta);
  if (!(s > 0.0 && s < 1.0)) fail(ErrorKind::Domain, "choose_K needs 0 < s < 1");
  KChoice out;
  out.raw = std::pow(static_cast<double>(level), 2.0 / (1.0 - s));
  const double exponent = out.raw > 0.0 ? std::round(std::log2(out.raw)) : 1.0;
  const int upper = level / 2;
  const double clamped = std::clamp(exponent, 1.0, static_cast<double>(std::max(upper, 1)));
  out.clamped = clamped != exponent;
  out.K = std::int64_t{1} << static_cast<int>(clamped);
  return out;
}

double eta_low(double u, std::int64_t K) {
  const double a = 1.0 / (2.0 * static_cast<double>(K));
  return raised_cosine_down((std::abs(u) - a) / a);
}

HighLow high_low_split(const GridFunction& f, double theta, std::int64_t K, const ConeGeometry& g) {
  require_tube(g, theta);
  if (f.n != g.grid()) fail(ErrorKind::Configuration, "function grid does not match the geometry");
  const Spectrum c = spectrum(f);
  double top = 0.0;
  for (const auto& v : c.coefficients) top = std::max(top, std::abs(v));
  const Vec3 direction = g.curve(theta);
  const double delta = g.delta();
  Spectrum low = c, high = c;
  for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
    const auto k = c.wave_numbers(i);
    if (!in_tube(g, theta, k)) {
      if (std::abs(c.coefficients[i]) > kLeakTolerance * top) {
        fail(ErrorKind::Precondition, "frequency support leaks outside the tube");
      }
      low.coefficients[i] = high.coefficients[i] = Complex{};
      continue;
    }
    const double u = (k[0] * direction[0] + k[1] * direction[1] + k[2] * direction[2]) * delta;
    const double e = eta_low(u, K);
    low.coefficients[i] = e * c.coefficients[i];
    high.coefficients[i] = (1.0 - e) * c.coefficients[i];
  }
  return {synthesize(high, g.spacing()), synthesize(low, g.spacing())};
}

LowEnvelope low_envelope(const IncidenceConfig& cfg, std::int64_t K, const ConeGeometry& g) {
  if (cfg.mode != IncidenceMode::Rescaled) fail(ErrorKind::Configuration, "low envelope needs a rescaled config");
  GridFunction sum = GridFunction::zeros(g.grid(), g.spacing());
  for (const auto& family : cfg.families) {
    const auto parts = high_low_split(synth_tube_function(family, g), family.theta, K, g);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.samples[i] += parts.low.samples[i];
  }
  LowEnvelope e;
  e.max_low = max_abs(sum);
  e.scale = std::pow(static_cast<double>(K), cfg.s - 1.0) * static_cast<double>(cfg.families.size());
  e.constant = e.scale > 0.0 ? e.max_low / e.scale : 0.0;
  return e;
}

Spectrum cap_restrict_spectrum(const Spectrum& c, int cap, const ConeGeometry& g) {
  if (cap < 0 || cap >= g.cap_count()) fail(ErrorKind::Configuration, "cap not in geometry");
  Spectrum out = c;
  for (std::size_t i = 0; i < out.coefficients.size(); ++i) {
    if (g.cap_of_point[i] != cap) out.coefficients[i] = Complex{};
  }
  return out;
}

GridFunction cap_restrict(const GridFunction& f, int cap, const ConeGeometry& g) {
  if (f.n != g.grid()) fail(ErrorKind::Configuration, "function grid does not match the geometry");
  return synthesize(cap_restrict_spectrum(spectrum(f), cap, g), f.spacing);
}

CapSelection check_tspacing(const ConeGeometry& g, std::vector<int> caps, double t) {
  CapSelection sel;
  sel.t = t;
  std::vector<std::int64_t> directions;
  for (const int cap : caps) directions.push_back(g.direction_of_cap(cap));
  std::sort(directions.begin(), directions.end());
  const auto worst = detail::worst_window_1d(directions, g.level, t, false);
  sel.caps = std::move(caps);
  sel.constant = worst.ratio;
  sel.witness_start = worst.start;
  sel.witness_width = worst.width;
  sel.valid = worst.ratio <= kSpacingConstant * (1.0 + kSlack);
  return sel;
}

CapSelection tspacing_subsample(const ConeGeometry& g, double t, std::uint64_t seed) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::Domain, "t must lie in [0, 1]");
  std::vector<int> caps;
  if (t == 1.0) {
    for (int i = 0; i < g.M(); ++i) caps.push_back(i);
  } else {
    for (const auto i : detail::thin_grid(g.M(), g.level, t, seed)) caps.push_back(static_cast<int>(i));
  }
  return check_tspacing(g, std::move(caps), t);
}

GridFunction random_cap_function(const ConeGeometry& g, const std::vector<int>& caps, std::uint64_t seed) {
  std::vector<bool> chosen(static_cast<std::size_t>(g.cap_count()), false);
  for (const int cap : caps) {
    if (cap < 0 || cap >= g.cap_count()) fail(ErrorKind::Configuration, "cap not in geometry");
    chosen[static_cast<std::size_t>(cap)] = true;
  }
  Spectrum c;
  c.n = g.grid();
  c.length = g.M();
  c.coefficients.assign(g.cap_of_point.size(), Complex{});
  Rng rng(seed);
  for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
    const int cap = g.cap_of_point[i];
    if (cap >= 0 && chosen[static_cast<std::size_t>(cap)]) c.coefficients[i] = std::polar(1.0, kTwoPi * rng.uniform());
  }
  return synthesize(c, g.spacing());
}

namespace {

void require_support(const Spectrum& c, const std::vector<bool>& allowed, const ConeGeometry& g, const char* what) {
  double top = 0.0;
  for (const auto& v : c.coefficients) top = std::max(top, std::abs(v));
  for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
    const int cap = g.cap_of_point[i];
    const bool ok = cap >= 0 && allowed[static_cast<std::size_t>(cap)];
    if (!ok && std::abs(c.coefficients[i]) > kLeakTolerance * top) {
      fail(ErrorKind::Precondition, std::string("frequency support leaks outside ") + what);
    }
  }
}

}  // namespace

DecouplingReport decoupling_ratio(const GridFunction& f, const std::vector<int>& caps, double t, double delta,
                                  const ConeGeometry& g) {
  if (level_of(delta) != g.level) fail(ErrorKind::Configuration, "delta does not match the geometry");
  if (f.n != g.grid()) fail(ErrorKind::Configuration, "function grid does not match the geometry");
  const auto spacing = check_tspacing(g, caps, t);
  if (!spacing.valid) {
    fail(ErrorKind::Precondition,
         fmt::format("t-spacing violated: {} caps in directions [{}, {}) exceed 64 (r/delta)^t", spacing.constant,
                     spacing.witness_start, spacing.witness_start + spacing.witness_width));
  }
  std::vector<bool> allowed(static_cast<std::size_t>(g.cap_count()), false);
  for (const int cap : caps) allowed[static_cast<std::size_t>(cap)] = true;
  const Spectrum c = spectrum(f);
  require_support(c, allowed, g, "the selected caps");

  DecouplingReport r;
  r.lhs = l4_norm(f);
  std::vector<int> distinct = caps;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double pieces = 0.0;
  for (const int cap : distinct) pieces += l4_norm(synthesize(cap_restrict_spectrum(c, cap, g), f.spacing));
  r.rhs = std::pow(delta, -t) * pieces;
  r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : 0.0;
  return r;
}

EnvelopeReport wave_envelope_rhs(const GridFunction& f, const ConeGeometry& g) {
  if (f.n != g.grid()) fail(ErrorKind::Configuration, "function grid does not match the geometry");
  const Spectrum c = spectrum(f);
  require_support(c, std::vector<bool>(static_cast<std::size_t>(g.cap_count()), true), g, "N_delta(Gamma)");

  EnvelopeReport report;
  report.l4 = l4_norm(f);
  const std::size_t count = f.size();
  std::vector<std::vector<double>> sigma_energy(static_cast<std::size_t>(g.sigma_count()));
  for (int sigma = 0; sigma < g.sigma_count(); ++sigma) {
    Spectrum piece = c;
    for (std::size_t i = 0; i < count; ++i) {
      const int cap = g.cap_of_point[i];
      if (cap < 0 || g.sigma_of_cap(cap) != sigma) piece.coefficients[i] = Complex{};
    }
    const GridFunction fs = synthesize(piece, f.spacing);
    auto& energy = sigma_energy[static_cast<std::size_t>(sigma)];
    energy.resize(count);
    for (std::size_t i = 0; i < count; ++i) energy[i] = std::norm(fs.samples[i]);
  }

  const auto un = static_cast<std::size_t>(f.n);
  const double M = g.M();
  for (int m = 0; m < g.tau_levels; ++m) {
    const double s = dyadic(m);
    for (int tau = 0; tau < g.tau_count(m); ++tau) {
      const auto members = g.sigmas_in_tau(m, tau);
      const auto frame = g.tau_frame(m, tau);
      const std::array<double, 3> sides{M, M * s, M * s * s};
      std::map<std::array<std::int64_t, 3>, std::pair<double, std::size_t>> boxes;
      for (std::size_t i = 0; i < count; ++i) {
        const Vec3 x{f.spacing * static_cast<double>(i / (un * un)), f.spacing * static_cast<double>((i / un) % un),
                     f.spacing * static_cast<double>(i % un)};
        const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(dot(x, frame[2]) / sides[0])),
                                              static_cast<std::int64_t>(std::floor(dot(x, frame[1]) / sides[1])),
                                              static_cast<std::int64_t>(std::floor(dot(x, frame[0]) / sides[2]))};
        double e = 0.0;
        for (const int sigma : members) e += sigma_energy[static_cast<std::size_t>(sigma)][i];
        auto& slot = boxes[key];
        slot.first += e;
        ++slot.second;
      }
      for (const auto& [key, value] : boxes) {
        const double term = value.first * value.first / static_cast<double>(value.second);
        report.terms.push_back({m, tau, key, value.first, value.second});
        report.total += term;
      }
    }
  }
  report.quotient = report.total > 0.0 ? report.l4 / report.total : 0.0;
  return report;
}

}  // namespace projlab
