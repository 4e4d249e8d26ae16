#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "projlab/fractal.hpp"

namespace projlab {

/// Dyadic cube prod [i 2^-k, (i+1) 2^-k] with indices in [-2^k, 2^k), i.e.
/// inside [-1, 1]^dim.
struct DyadicCube {
  int level = 0;
  Cell index{0, 0, 0};
  int dim = 1;

  double side() const;
  friend bool operator==(const DyadicCube&, const DyadicCube&) = default;
};

struct Covering {
  int dim = 1;
  double s = 0.0;
  double epsilon = 1.0;
  int min_level = 0;
  int k_max = 0;
  /// cubes[k] holds the sorted level-k cube indices, k = 0..k_max.
  std::vector<std::vector<Cell>> cubes;
  std::shared_ptr<const PointSet> target;

  std::size_t cube_count() const;
  std::vector<DyadicCube> all_cubes() const;
};

/// Level-k cube containing a lattice cell of p. A coordinate equal to 1 is
/// placed in the last cube.
Cell cube_of(const PointSet& p, std::size_t i, int k);

Covering greedy_cover(const PointSet& x, double s, double epsilon, int min_level = 1);

struct Condition3Witness {
  int coarse_level = 0;
  Cell coarse_index{0, 0, 0};
  int fine_level = 0;
  std::size_t count = 0;
};

struct CoveringReport {
  bool cover_ok = false;
  bool disjoint = false;
  bool budget_ok = false;
  double budget_value = 0.0;
  double worst_condition3_ratio = 0.0;
  /// First uncovered target cell (coordinates) when cover_ok is false.
  Vec3 uncovered{0, 0, 0};
  Condition3Witness witness;

  bool valid() const noexcept;
};

/// Checks the covering against its own target (or `target` when given).
CoveringReport validate_covering(const Covering& c, const PointSet* target = nullptr);

double dyadic_content(const PointSet& x, double t, int max_level);

nlohmann::json covering_to_json(const Covering& c);
Covering covering_from_json(const nlohmann::json& j);

}  // namespace projlab
