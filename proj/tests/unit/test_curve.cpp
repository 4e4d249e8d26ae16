#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "projlab/curve.hpp"
#include "projlab/error.hpp"

using namespace projlab;

namespace {

// Independent brute force: every window [c, c + r] with c on the delta grid
// (including starts left of 0) and r dyadic in [delta, 1].
double brute_force_net_constant(const std::vector<double>& thetas, int level, double t) {
  const double delta = std::ldexp(1.0, -level);
  const long cells = 1L << level;
  double worst = 0.0;
  for (int m = 0; m <= level; ++m) {
    const double r = std::ldexp(1.0, m - level);
    for (long c = -(1L << m); c <= cells; ++c) {
      const double lo = c * delta;
      int count = 0;
      for (double th : thetas) count += (th >= lo - 1e-12 && th <= lo + r + 1e-12);
      worst = std::max(worst, count / std::pow(r / delta, t));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("model curve values") {
  const Curve g = model_curve();
  const Vec3 v = eval_curve(g, 0.0);
  CHECK(v[0] == doctest::Approx(0.7071068).epsilon(1e-7));
  CHECK(v[1] == 0.0);
  CHECK(v[2] == doctest::Approx(0.7071068).epsilon(1e-7));
  for (int i = 0; i <= 64; ++i) {
    const Vec3 w = eval_curve(g, i / 64.0);
    CHECK(w[2] == 1.0 / std::sqrt(2.0));
    CHECK(std::abs(norm(w) - 1.0) < 1e-10);
  }
}

TEST_CASE("great circle stays in the plane") {
  const Vec3 v = eval_curve(great_circle(), 0.3);
  CHECK(v[2] == 0.0);
  CHECK(std::abs(norm(v) - 1.0) < 1e-10);
}

TEST_CASE("parameter outside [0,1] is a domain error") {
  const Curve g = model_curve();
  for (double bad : {-1e-9, 1.0 + 1e-9, double(NAN)}) {
    try {
      (void)eval_curve(g, bad);
      FAIL("expected a domain error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Domain);
    }
  }
}

TEST_CASE("nondegeneracy margin") {
  // det((c,s,1),(-s,c,0),(-c,-s,0)) = s^2 + c^2 = 1, scaled by (2^{-1/2})^3.
  const double symbolic = 1.0 / (2.0 * std::sqrt(2.0));
  const Curve g = model_curve();
  CHECK(nondegeneracy_margin(g, 1024) == doctest::Approx(symbolic).epsilon(1e-12));
  CHECK(std::abs(nondegeneracy_margin(g, 2048) - nondegeneracy_margin(g, 1024)) < 1e-6);
  CHECK(std::abs(nondegeneracy_margin(g.with_finite_differences(), 1024) - symbolic) < 1e-4);
  CHECK(nondegeneracy_margin(great_circle(), 1024) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(nondegeneracy_margin(helix_curve(), 4096) > 0.0);
  CHECK_THROWS_AS((void)nondegeneracy_margin(g, 1), Error);
}

TEST_CASE("helix finite differences agree with a coarser step") {
  const Curve h = helix_curve();
  for (double th : {0.0, 0.25, 0.5, 1.0}) {
    const Vec3 d = h.derivative(th);
    const Vec3 coarse = (1.0 / 0x1p-11) * (h.raw(th + 0x1p-12) - h.raw(th - 0x1p-12));
    CHECK(norm(d - coarse) < 1e-6);
    CHECK(std::abs(norm(h(th)) - 1.0) < h.norm_tolerance());
  }
}

TEST_CASE("table curve reproduces the model curve") {
  std::vector<CurveTableRow> rows;
  const Curve g = model_curve();
  for (int i = 0; i <= 64; ++i) rows.push_back({i / 64.0, g(i / 64.0)});
  const Curve table = curve_from_table(rows);
  for (int i = 0; i <= 100; ++i) {
    CHECK(norm(table(i / 100.0) - g(i / 100.0)) < 1e-6);
  }
  CHECK(std::abs(nondegeneracy_margin(table, 1024) - nondegeneracy_margin(g, 1024)) < 1e-3);

  const auto path = std::filesystem::temp_directory_path() / "projlab_curve_table.csv";
  {
    std::ofstream out(path);
    out << "theta,x,y,z\n";
    out.precision(17);
    for (const auto& r : rows) out << r.theta << ',' << r.point[0] << ',' << r.point[1] << ',' << r.point[2] << '\n';
  }
  const Curve loaded = curve_by_name(path.string());
  CHECK(norm(loaded(0.3) - table(0.3)) < 1e-12);
  std::filesystem::remove(path);
  CHECK_THROWS_AS((void)curve_by_name("no-such-curve"), Error);
}

TEST_CASE("direction nets") {
  const Curve g = model_curve();
  SUBCASE("t = 1 is the full grid") {
    const auto net = direction_net(g, 0x1p-6, 1.0, 3);
    REQUIRE(net.size() == 65);
    for (std::size_t i = 0; i < net.size(); ++i) CHECK(net.thetas[i] == i / 64.0);
    CHECK(net.constant <= 2.0);
  }
  SUBCASE("t = 1/2 passes the brute-force window scan") {
    const auto net = direction_net(g, 0x1p-8, 0.5, 7);
    CHECK(net.size() >= 1);
    CHECK(net.size() >= 8);
    CHECK(net.size() <= 32);
    const double brute = brute_force_net_constant(net.thetas, 8, 0.5);
    CHECK(net.constant == doctest::Approx(brute));
    CHECK(brute <= 64.0);
    for (std::size_t i = 1; i < net.size(); ++i) CHECK(net.thetas[i] - net.thetas[i - 1] >= 0x1p-8);
    const double required = std::exp2(8 * 0.5) / 64.0 / 16.0;
    CHECK(static_cast<double>(net.size()) >= required);
  }
  SUBCASE("t = 0 is a single point") {
    CHECK(direction_net(g, 0x1p-4, 0.0, 11).size() == 1);
  }
  SUBCASE("same seed, same net") {
    CHECK(direction_net(g, 0x1p-7, 0.3, 5).thetas == direction_net(g, 0x1p-7, 0.3, 5).thetas);
  }
  SUBCASE("every generated net passes the exhaustive check") {
    for (int level = 2; level <= 8; ++level) {
      for (double t : {0.0, 0.3, 0.5, 0.7, 1.0}) {
        const auto net = direction_net(g, std::ldexp(1.0, -level), t, 100 + level);
        CHECK(brute_force_net_constant(net.thetas, level, t) <= 64.0);
      }
    }
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS((void)direction_net(g, 0.3, 0.5, 1), Error);
    CHECK_THROWS_AS((void)direction_net(g, 0x1p-4, 1.5, 1), Error);
  }
}
