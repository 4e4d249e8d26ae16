#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "doctest.h"
#include "projlab/covering.hpp"
#include "projlab/error.hpp"

using namespace projlab;

namespace {

// Independent scan of the coarse/fine count condition: for every pair of cover cubes (coarse
// candidate from any level-l ancestor, fine cube) using plain coordinates.
double naive_condition3(const Covering& c) {
  std::map<std::tuple<int, long, long, int>, int> counts;
  for (int k = 0; k < static_cast<int>(c.cubes.size()); ++k) {
    for (const auto& cube : c.cubes[k]) {
      const double x = cube[0] * std::ldexp(1.0, -k), y = cube[1] * std::ldexp(1.0, -k);
      for (int l = 0; l < k; ++l) {
        const long ax = static_cast<long>(std::floor(x * std::ldexp(1.0, l)));
        const long ay = static_cast<long>(std::floor(y * std::ldexp(1.0, l)));
        ++counts[{l, ax, ay, k}];
      }
    }
  }
  double worst = 0.0;
  for (const auto& [key, n] : counts) {
    worst = std::max(worst, n / std::exp2((std::get<3>(key) - std::get<0>(key)) * c.s));
  }
  return worst;
}

// Independent content recursion on intervals [a, a + r) of [0, 1).
double naive_content(const std::vector<double>& xs, double a, double r, int depth, double t) {
  std::vector<double> inside;
  for (double x : xs)
    if (x >= a && x < a + r) inside.push_back(x);
  if (inside.empty()) return 0.0;
  if (depth == 0) return std::pow(r, t);
  return std::min(std::pow(r, t), naive_content(inside, a, r / 2, depth - 1, t) +
                                      naive_content(inside, a + r / 2, r / 2, depth - 1, t));
}

}  // namespace

TEST_CASE("greedy_cover examples") {
  SUBCASE("single cell") {
    const auto p = make_point_set(1, 6, {{5, 0, 0}}, {}, 0.0);
    const auto c = greedy_cover(p, 0.5, 1.0);
    CHECK(c.cube_count() == 1);
    CHECK(c.cubes[6].size() == 1);
    const auto r = validate_covering(c);
    CHECK(r.valid());
    CHECK(r.budget_value == doctest::Approx(std::exp2(-3.0)));
  }
  SUBCASE("four corners of the square") {
    const auto p = make_point_set(2, 6, {{0, 0, 0}, {63, 0, 0}, {0, 63, 0}, {63, 63, 0}}, {}, 0.0);
    const auto c = greedy_cover(p, 0.5, 1.0);
    CHECK(c.cube_count() == 4);
    const auto r = validate_covering(c);
    CHECK(r.valid());
    CHECK(naive_condition3(c) == doctest::Approx(r.worst_condition3_ratio));
    CHECK(r.worst_condition3_ratio <= 1.0);
  }
  SUBCASE("full square grid is infeasible") {
    std::vector<Cell> cells;
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 64; ++j) cells.push_back({i, j, 0});
    const auto p = make_point_set(2, 6, cells, {}, 2.0);
    try {
      (void)greedy_cover(p, 0.5, 1.0);
      FAIL("expected an infeasible error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Infeasible);
    }
  }
  SUBCASE("degenerate level range") {
    const auto p = make_point_set(1, 3, {{1, 0, 0}}, {}, 0.0);
    try {
      (void)greedy_cover(p, 0.5, 1.0, 3);
      FAIL("expected a range error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Range);
    }
  }
}

TEST_CASE("greedy_cover on random sets matches the naive scan and is idempotent") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Cell root{static_cast<std::int64_t>(seed % 4), static_cast<std::int64_t>(seed % 3), 0};
    const auto local = random_delta_set(2, 6, 0.3, seed, std::span(&root, 1));
    // Read at level 8 the level-6 set becomes one inside the level-2 cube `root`.
    const auto p = make_point_set(2, 8, local.cells, {}, 0.3);
    const auto c = greedy_cover(p, 0.5, 1.0);
    const auto r = validate_covering(c);
    CHECK(r.valid());
    CHECK(naive_condition3(c) == doctest::Approx(r.worst_condition3_ratio));
    const auto again = greedy_cover(*c.target, 0.5, 1.0);
    CHECK(validate_covering(again).budget_value == r.budget_value);
  }
}

TEST_CASE("validate_covering") {
  const auto grid = cantor_1d(0.5, 4);
  Covering whole;
  whole.dim = 1;
  whole.s = 0.7;
  whole.epsilon = 1.0;
  whole.k_max = 4;
  whole.cubes.assign(5, {});
  whole.cubes[0].push_back({0, 0, 0});
  const auto r = validate_covering(whole, &grid);
  CHECK(r.cover_ok);
  CHECK(r.budget_value == 1.0);

  Covering missing = whole;
  missing.cubes[0].clear();
  for (int i = 0; i < 16; ++i)
    if (i != 9) missing.cubes[4].push_back({i, 0, 0});
  const auto m = validate_covering(missing, &grid);
  CHECK_FALSE(m.cover_ok);
  CHECK(m.uncovered[0] == 9.0 / 16.0);

  Covering overlap = whole;
  overlap.cubes[4].push_back({3, 0, 0});
  CHECK_FALSE(validate_covering(overlap, &grid).disjoint);
}

TEST_CASE("dyadic_content") {
  CHECK(dyadic_content(cantor_1d(0.5, 8), 1.0, 8) == doctest::Approx(1.0));
  const auto c = cantor_1d(1.0 / 3.0, 8);
  const double t = std::log(2.0) / std::log(3.0);
  const double v = dyadic_content(c, t, c.level);
  std::vector<double> xs;
  for (std::size_t i = 0; i < c.size(); ++i) xs.push_back(c.coordinate(i, 0));
  CHECK(v == doctest::Approx(naive_content(xs, 0.0, 1.0, c.level, t)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.86929225954733658).epsilon(1e-9));
  CHECK(v >= 0.25);
  CHECK(v <= 1.0);
  CHECK(dyadic_content(c, 0.9, c.level) <= std::exp2(8) * std::pow(3.0, -8 * 0.9));
  double previous = 2.0;
  for (double tt = 0.0; tt <= 1.0; tt += 0.1) {
    const double value = dyadic_content(c, tt, c.level);
    CHECK(value <= previous + 1e-15);
    previous = value;
  }
  for (int L = 1; L <= c.level; ++L) CHECK(dyadic_content(c, t, L) <= dyadic_content(c, t, L - 1) + 1e-15);
}

TEST_CASE("covering json round trip") {
  const auto p = make_point_set(2, 6, {{0, 0, 0}, {63, 0, 0}, {0, 63, 0}, {63, 63, 0}}, {}, 0.0);
  const auto c = greedy_cover(p, 0.5, 1.0);
  const auto back = covering_from_json(covering_to_json(c));
  CHECK(back.cubes == c.cubes);
  CHECK(back.s == c.s);
  CHECK(validate_covering(back, &p).valid());
}
