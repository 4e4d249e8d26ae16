#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"
#include "projlab/fourier.hpp"

using namespace projlab;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const ConeGeometry& geometry(int level, double floor = 0.5) {
  static std::map<std::pair<int, double>, ConeGeometry> cache;
  auto it = cache.find({level, floor});
  if (it == cache.end()) it = cache.emplace(std::pair{level, floor}, build_geometry(model_curve(), std::ldexp(1.0, -level), floor)).first;
  return it->second;
}

GridFunction random_function(int n, std::uint64_t seed) {
  GridFunction f = GridFunction::zeros(n);
  Rng rng(seed);
  for (auto& v : f.samples) v = {rng.uniform() - 0.5, rng.uniform() - 0.5};
  return f;
}

// Direct summation of f(spacing * j) = sum_k c_k exp(2 pi i k . j / n).
GridFunction direct_synthesis(const std::vector<std::pair<std::array<std::int64_t, 3>, Complex>>& terms, int n,
                              double spacing) {
  GridFunction f = GridFunction::zeros(n, spacing);
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const std::array<double, 3> j{double(i / (un * un)), double((i / un) % un), double(i % un)};
    Complex sum{};
    for (const auto& [k, c] : terms) sum += c * std::polar(1.0, kTwoPi * (k[0] * j[0] + k[1] * j[1] + k[2] * j[2]) / n);
    f.samples[i] = sum;
  }
  return f;
}

std::vector<int> all_directions(const ConeGeometry& g) {
  std::vector<int> caps;
  for (int i = 0; i < g.M(); ++i) caps.push_back(i);
  return caps;
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("l4 norm examples") {
  const int n = 16;
  GridFunction one = GridFunction::zeros(n);
  for (auto& v : one.samples) v = 1.0;
  CHECK(l4_norm(one) == doctest::Approx(4096.0));

  GridFunction half = GridFunction::zeros(n);
  for (std::size_t i = 0; i < half.size() / 2; ++i) half.samples[i] = 1.0;
  CHECK(l4_norm(half) == doctest::Approx(2048.0));

  GridFunction wave = GridFunction::zeros(n);
  for (std::size_t i = 0; i < wave.size(); ++i) wave.samples[i] = std::polar(1.0, kTwoPi * 3.0 * double(i % n) / n);
  CHECK(l4_norm(wave) == doctest::Approx(4096.0).epsilon(1e-12));
}

TEST_CASE("spectrum of an exponential and Parseval on every grid size") {
  GridFunction wave = GridFunction::zeros(16);
  for (std::size_t i = 0; i < wave.size(); ++i) {
    const double j0 = double(i / 256), j2 = double(i % 16);
    wave.samples[i] = std::polar(1.0, kTwoPi * (2.0 * j0 - 5.0 * j2) / 16.0);
  }
  const Spectrum c = spectrum(wave);
  CHECK(std::abs(c.coefficients[c.index(2, 0, -5)] - Complex{1.0}) < 1e-12);
  const auto k = c.wave_numbers(c.index(2, 0, -5));
  CHECK(k == std::array<std::int64_t, 3>{2, 0, -5});

  for (const int n : {16, 32, 64, 128}) {
    CAPTURE(n);
    const GridFunction f = random_function(n, n);
    CHECK(parseval_error(f) < 1e-8);
    CHECK(max_difference(synthesize(spectrum(f), 1.0), f) < 1e-10 * max_abs(f));
  }
  CHECK_THROWS_AS(GridFunction::zeros(24), Error);
}

TEST_CASE("cone geometry counts") {
  const auto& g = geometry(4);
  CHECK(g.cap_count() == 16);
  CHECK(g.sigma_count() == 4);
  CHECK(g.tau_levels == 3);
  CHECK(g.tau_count(0) == 1);
  CHECK(g.tau_count(2) == 4);
  CHECK(g.grid() == 32);

  const auto& wide = geometry(4, 0.25);
  CHECK(wide.shells == 2);
  CHECK(wide.cap_count() == 32);
  std::size_t narrow_points = 0, wide_points = 0;
  for (const auto p : g.points_per_cap) narrow_points += p;
  for (const auto p : wide.points_per_cap) wide_points += p;
  CHECK(wide_points > narrow_points);

  CHECK_THROWS_AS(build_geometry(great_circle(), 1.0 / 16), Error);
  try {
    build_geometry(great_circle(), 1.0 / 16);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Geometry);
  }
}

TEST_CASE("every lattice point of the neighborhood gets exactly one cap") {
  for (const int level : {4, 5}) {
    const auto& g = geometry(level);
    const double delta = g.delta();
    Spectrum layout;
    layout.n = g.grid();
    const int samples = 20001;
    std::vector<Vec3> table;
    for (int i = 0; i < samples; ++i) table.push_back(g.curve(double(i) / (samples - 1)));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < g.cap_of_point.size(); ++i) {
      const auto k = layout.wave_numbers(i);
      const Vec3 xi{k[0] * delta, k[1] * delta, k[2] * delta};
      int arg = 0;
      double rho = -INFINITY;
      for (int j = 0; j < samples; ++j) {
        const double v = dot(xi, table[j]);
        if (v > rho) {
          rho = v;
          arg = j;
        }
      }
      const double dist = std::sqrt(std::max(0.0, dot(xi, xi) - rho * rho));
      const double theta = double(arg) / (samples - 1);
      const double margin = 1e-3;
      const bool inside = rho >= 0.5 + margin && rho <= 1.0 - margin && dist <= delta * (1 - margin);
      const bool outside = rho < 0.5 - margin || rho > 1.0 + margin || dist > delta * (1 + margin);
      if (inside) {
        REQUIRE(g.cap_of_point[i] >= 0);
        const double scaled = theta / delta;
        if (std::abs(scaled - std::round(scaled)) > 1e-2) {
          CHECK(g.cap_of_point[i] == std::min(g.M() - 1, int(std::floor(scaled))));
        }
        ++checked;
      }
      if (outside) CHECK(g.cap_of_point[i] == -1);
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("cap overlap and plank nesting") {
  const auto& g = geometry(5);
  // Neighboring caps within delta of a point at radius r sit within
  // delta / (r |gamma'|) in parameter; |gamma_o'| = 2^-1/2, r >= 1/2.
  const int bound = 2 * int(std::ceil(2.0 * std::sqrt(2.0))) + 1;
  CHECK(g.max_overlap >= 1);
  CHECK(g.max_overlap <= bound);

  for (int cap = 0; cap < g.cap_count(); ++cap) {
    const int sigma = g.sigma_of_cap(cap);
    const double lo = cap * g.delta(), hi = lo + g.delta();
    const double width = std::ldexp(1.0, -g.sigma_level);
    CHECK(lo >= sigma * width);
    CHECK(hi <= (sigma + 1) * width);
  }
  for (int m = 0; m < g.tau_levels; ++m) {
    std::vector<int> seen(static_cast<std::size_t>(g.sigma_count()), 0);
    for (int tau = 0; tau < g.tau_count(m); ++tau) {
      for (const int sigma : g.sigmas_in_tau(m, tau)) ++seen[static_cast<std::size_t>(sigma)];
    }
    for (const int c : seen) CHECK(c == 1);
  }
  const auto frame = g.tau_frame(1, 0);
  CHECK(std::abs(dot(frame[0], frame[1])) < 1e-12);
  CHECK(std::abs(norm(frame[2]) - 1.0) < 1e-12);

  const auto j = geometry_to_json(g);
  CHECK(j["caps"].size() == 32u);
  CHECK(j["caps"][0]["corners"].size() == 4u);
}

TEST_CASE("tube functions") {
  const auto& g = geometry(4);
  const double M = g.M();

  SlabFamily single;
  single.theta = 0.25;
  single.slabs.push_back({0.25, 0.0, 1.0, M});
  const GridFunction f = synth_tube_function(single, g);
  double imag = 0.0;
  for (const auto& v : f.samples) imag = std::max(imag, std::abs(v.imag()));
  CHECK(imag < 1e-12);
  // f(0) is the sum of the normalized window over the tube.
  Spectrum layout;
  layout.n = g.grid();
  std::vector<std::pair<std::array<std::int64_t, 3>, Complex>> terms;
  double total = 0.0;
  const Vec3 d = g.curve(0.25);
  for (std::size_t i = 0; i < g.cap_of_point.size(); ++i) {
    const auto k = layout.wave_numbers(i);
    if (!in_tube(g, 0.25, k)) continue;
    const double w = tube_window((k[0] * d[0] + k[1] * d[1] + k[2] * d[2]) * g.delta());
    total += w;
    terms.push_back({k, w});
  }
  for (auto& term : terms) term.second /= total;
  const GridFunction oracle = direct_synthesis(terms, g.grid(), g.spacing());
  CHECK(std::abs(oracle.samples[0] - Complex{1.0}) < 1e-12);
  CHECK(max_difference(f, oracle) < 1e-12);
  CHECK(max_abs(f) == doctest::Approx(1.0).epsilon(1e-12));

  const auto profile = tube_profile(f, single, g);
  CHECK(profile.core_min >= 0.5);
  CHECK(profile.off_max < profile.core_min);

  SlabFamily pair;
  pair.theta = 0.25;
  const double c = 3.0;
  pair.slabs.push_back({0.25, c, 1.0, M});
  pair.slabs.push_back({0.25, -c, 1.0, M});
  const Spectrum fp = spectrum(synth_tube_function(pair, g));
  for (const auto& [k, w] : terms) {
    const double u = (k[0] * d[0] + k[1] * d[1] + k[2] * d[2]) * g.delta();
    CHECK(std::abs(fp.coefficients[fp.index(k[0], k[1], k[2])]) ==
          doctest::Approx(2.0 * std::abs(w.real() * std::cos(kTwoPi * c * u))).epsilon(1e-9));
  }
  const auto pair_profile = tube_profile(synth_tube_function(pair, g), pair, g);
  CHECK(pair_profile.core_min >= 0.5);

  SlabFamily empty;
  empty.theta = 0.5;
  CHECK(max_abs(synth_tube_function(empty, g)) == 0.0);

  SlabFamily off_lattice;
  off_lattice.theta = 0.3;
  CHECK_THROWS_AS(synth_tube_function(off_lattice, g), Error);
  SlabFamily unit_scale;
  unit_scale.theta = 0.25;
  unit_scale.slabs.push_back({0.25, 0.0, g.delta(), 1.0});
  CHECK_THROWS_AS(synth_tube_function(unit_scale, g), Error);
}

TEST_CASE("choose_K") {
  const auto a = choose_K(std::ldexp(1.0, -10), 0.5);
  CHECK(a.raw == doctest::Approx(1e4));
  CHECK(a.K == 32);
  CHECK(a.clamped);
  const auto b = choose_K(1.0 / 16, 0.5);
  CHECK(b.raw == doctest::Approx(256.0));
  CHECK(b.K == 4);
  CHECK(b.clamped);
  const auto c = choose_K(std::ldexp(1.0, -64), 0.5);
  CHECK(c.raw == doctest::Approx(16777216.0));
  CHECK(c.K == std::int64_t{1} << 24);
  CHECK_FALSE(c.clamped);
  CHECK_THROWS_AS(choose_K(1.0 / 16, 1.0), Error);
  CHECK_THROWS_AS(choose_K(1.0 / 16, 0.0), Error);

  CHECK(eta_low(0.0, 4) == 1.0);
  CHECK(eta_low(0.125, 4) == 1.0);
  CHECK(eta_low(0.25, 4) == 0.0);
  CHECK(eta_low(-0.3, 4) == 0.0);
}

TEST_CASE("high-low split") {
  const auto& g = geometry(5);
  const std::int64_t K = 4;
  for (const double theta : {0.0, 0.375, 1.0}) {
    SlabFamily family;
    family.theta = theta;
    for (const double c : {-7.0, 2.0, 11.0}) family.slabs.push_back({theta, c, 1.0, double(g.M())});
    const GridFunction f = synth_tube_function(family, g);
    const auto parts = high_low_split(f, theta, K, g);
    GridFunction sum = parts.high;
    for (std::size_t i = 0; i < sum.size(); ++i) sum.samples[i] += parts.low.samples[i];
    CHECK(max_difference(sum, f) <= 1e-10 * max_abs(f));

    Spectrum c = spectrum(f);
    const Vec3 d = g.curve(theta);
    for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
      const auto k = c.wave_numbers(i);
      if (std::abs((k[0] * d[0] + k[1] * d[1] + k[2] * d[2]) * g.delta()) < 1.0 / K) c.coefficients[i] = 0.0;
    }
    const GridFunction upper = synthesize(c, g.spacing());
    const auto split = high_low_split(upper, theta, K, g);
    double energy = 0.0, low = 0.0;
    for (std::size_t i = 0; i < upper.size(); ++i) {
      energy += std::norm(upper.samples[i]);
      low += std::norm(split.low.samples[i]);
    }
    CHECK(low <= 1e-8 * energy);
  }
  GridFunction other = random_function(g.grid(), 3);
  CHECK_THROWS_AS(high_low_split(other, 0.5, K, g), Error);
}

TEST_CASE("low envelope constant is reported") {
  const auto& g = geometry(4);
  const IncidenceConfig cfg = rescale_config(origin_config(model_curve(), 4, 0.5));
  const auto K = choose_K(g.delta(), cfg.s).K;
  const auto e = low_envelope(cfg, K, g);
  CHECK(e.max_low > 0.0);
  CHECK(e.scale == doctest::Approx(std::pow(double(K), -0.5) * double(cfg.families.size())));
  CHECK(e.constant == doctest::Approx(e.max_low / e.scale));
  CHECK(std::isfinite(e.constant));
  CHECK_THROWS_AS(low_envelope(origin_config(model_curve(), 4, 0.5), K, g), Error);
}

TEST_CASE("cap restriction is a linear idempotent partition") {
  const auto& g = geometry(4);
  const auto caps = all_directions(g);
  const GridFunction f = random_cap_function(g, caps, 11);
  GridFunction sum = GridFunction::zeros(g.grid(), g.spacing());
  double pieces = 0.0, whole = 0.0;
  for (const auto& v : f.samples) whole += std::norm(v);
  for (const int cap : caps) {
    const GridFunction piece = cap_restrict(f, cap, g);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.samples[i] += piece.samples[i];
    for (const auto& v : piece.samples) pieces += std::norm(v);
    CHECK(max_difference(cap_restrict(piece, cap, g), piece) < 1e-12 * max_abs(f));
  }
  CHECK(max_difference(sum, f) < 1e-10 * max_abs(f));
  CHECK(relative(pieces, whole) < 1e-8);

  const GridFunction one = random_cap_function(g, {5}, 2);
  CHECK(max_difference(cap_restrict(one, 5, g), one) < 1e-12 * max_abs(one));

  const GridFunction other = random_cap_function(g, caps, 12);
  GridFunction combo = f;
  const Complex a{2.0, -1.0};
  for (std::size_t i = 0; i < combo.size(); ++i) combo.samples[i] = a * f.samples[i] + other.samples[i];
  const GridFunction lhs = cap_restrict(combo, 3, g);
  const GridFunction p = cap_restrict(f, 3, g), q = cap_restrict(other, 3, g);
  double err = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) err = std::max(err, std::abs(lhs.samples[i] - a * p.samples[i] - q.samples[i]));
  CHECK(err < 1e-12 * max_abs(combo));
  CHECK_THROWS_AS(cap_restrict(f, 16, g), Error);
}

TEST_CASE("t-spacing subsample") {
  const auto& g4 = geometry(4);
  CHECK(tspacing_subsample(g4, 1.0, 1).caps.size() == 16u);
  CHECK(tspacing_subsample(g4, 0.0, 1).caps.size() == 1u);

  const auto& g = geometry(6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sel = tspacing_subsample(g, 0.5, seed);
    CHECK(sel.caps.size() >= 6u);
    CHECK(sel.caps.size() <= 10u);
    CHECK(sel.valid);
    // Exhaustive half-open window scan over every dyadic r and every start.
    double worst = 0.0;
    for (int m = 0; m <= g.level; ++m) {
      const int w = 1 << m;
      for (int start = -w; start < g.M(); ++start) {
        int count = 0;
        for (const int cap : sel.caps) count += cap >= start && cap < start + w;
        worst = std::max(worst, count / std::pow(double(w), 0.5));
      }
    }
    CHECK(sel.constant == doctest::Approx(worst));
    CHECK(worst <= kSpacingConstant);
  }
}

TEST_CASE("single-cap decoupling ratio is delta^t") {
  for (const int level : {4, 5, 6}) {
    const auto& g = geometry(level);
    for (const double t : {0.0, 0.5, 1.0}) {
      const int cap = g.M() / 3;
      const auto r = decoupling_ratio(random_cap_function(g, {cap}, 9), {cap}, t, g.delta(), g);
      CHECK(relative(r.ratio, std::pow(g.delta(), t)) < 1e-6);
    }
  }
}

TEST_CASE("all caps with unit coefficients: direct summation oracle") {
  const auto& g = geometry(4);
  Spectrum layout;
  layout.n = g.grid();
  std::vector<std::pair<std::array<std::int64_t, 3>, Complex>> terms;
  std::map<int, std::vector<std::pair<std::array<std::int64_t, 3>, Complex>>> by_cap;
  for (std::size_t i = 0; i < g.cap_of_point.size(); ++i) {
    if (g.cap_of_point[i] < 0) continue;
    terms.push_back({layout.wave_numbers(i), 1.0});
    by_cap[g.cap_of_point[i]].push_back(terms.back());
  }
  const GridFunction f = direct_synthesis(terms, g.grid(), g.spacing());
  double pieces = 0.0;
  for (const auto& [cap, list] : by_cap) pieces += l4_norm(direct_synthesis(list, g.grid(), g.spacing()));
  const double oracle = l4_norm(f) / (16.0 * pieces);

  const auto caps = all_directions(g);
  const auto r = decoupling_ratio(f, caps, 1.0, g.delta(), g);
  CHECK(relative(r.ratio, oracle) < 1e-10);
  CHECK(r.ratio == doctest::Approx(7.0732423748321018).epsilon(1e-10));
}

TEST_CASE("decoupling with random phases") {
  const auto& g = geometry(5);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sel = tspacing_subsample(g, 0.5, seed);
    const auto r = decoupling_ratio(random_cap_function(g, sel.caps, 1000 + seed), sel.caps, 0.5, g.delta(), g);
    worst = std::max(worst, r.ratio);
  }
  CHECK(worst <= 4.0);

  const auto sel = tspacing_subsample(g, 0.5, 1);
  const GridFunction f = random_cap_function(g, sel.caps, 5);
  const auto base = decoupling_ratio(f, sel.caps, 0.5, g.delta(), g);
  GridFunction scaled = f;
  for (auto& v : scaled.samples) v *= Complex{0.0, 3.0};
  const auto r3 = decoupling_ratio(scaled, sel.caps, 0.5, g.delta(), g);
  CHECK(relative(r3.lhs, 81.0 * base.lhs) < 1e-10);
  CHECK(relative(r3.rhs, 81.0 * base.rhs) < 1e-10);
  CHECK(relative(r3.ratio, base.ratio) < 1e-10);

  auto larger = sel.caps;
  for (int cap = 0; cap < g.M() && larger.size() < sel.caps.size() + 2; ++cap) {
    if (std::find(larger.begin(), larger.end(), cap) == larger.end()) larger.push_back(cap);
  }
  if (check_tspacing(g, larger, 0.5).valid) {
    CHECK(decoupling_ratio(f, larger, 0.5, g.delta(), g).rhs >= base.rhs);
  }

  // Leakage outside the chosen caps and spacing violations are refused.
  const auto all = all_directions(g);
  CHECK_THROWS_AS(decoupling_ratio(random_cap_function(g, all, 1), sel.caps, 0.5, g.delta(), g), Error);
  // Two radial shells put 2 caps on each of the 64 directions: 128 > 64 at t = 0.
  const auto& g6 = geometry(6, 0.25);
  std::vector<int> all6;
  for (int cap = 0; cap < g6.cap_count(); ++cap) all6.push_back(cap);
  try {
    decoupling_ratio(random_cap_function(g6, all6, 1), all6, 0.0, g6.delta(), g6);
    FAIL("expected a spacing violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Precondition);
    CHECK(std::string(e.what()).find("t-spacing") != std::string::npos);
  }
}

TEST_CASE("wave envelope") {
  const auto& g = geometry(4);
  const auto zero = wave_envelope_rhs(GridFunction::zeros(g.grid(), g.spacing()), g);
  CHECK(zero.total == 0.0);
  CHECK(zero.quotient == 0.0);

  // Single sigma planks with unit coefficients: the finest level alone
  // carries about half of the l4 mass, the sum stays within a factor 2.
  for (int sigma = 0; sigma < g.sigma_count(); ++sigma) {
    Spectrum c;
    c.n = g.grid();
    c.length = g.M();
    c.coefficients.assign(g.cap_of_point.size(), Complex{});
    for (std::size_t i = 0; i < c.coefficients.size(); ++i) {
      if (g.cap_of_point[i] >= 0 && g.sigma_of_cap(g.cap_of_point[i]) == sigma) c.coefficients[i] = 1.0;
    }
    const auto plank = wave_envelope_rhs(synthesize(c, g.spacing()), g);
    CHECK(plank.quotient > 0.5);
    CHECK(plank.quotient <= 2.0);
    std::size_t volume = 0;
    double finest = 0.0;
    for (const auto& term : plank.terms) {
      if (term.m == 0) volume += term.volume;
      if (term.m == g.tau_levels - 1) finest += term.square_sum * term.square_sum / double(term.volume);
    }
    CHECK(volume == c.coefficients.size());
    // Cauchy-Schwarz on each box: one level never exceeds the l4 mass.
    CHECK(finest <= plank.l4 * (1 + 1e-12));
  }

  const auto caps = all_directions(g);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = wave_envelope_rhs(random_cap_function(g, caps, seed), g);
    CHECK(r.l4 <= 2.0 * std::pow(g.delta(), -0.5) * r.total);
  }
  CHECK_THROWS_AS(wave_envelope_rhs(random_function(g.grid(), 1), g), Error);
}
