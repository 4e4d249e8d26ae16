#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "projlab/vec3.hpp"

namespace projlab {

/// Integer lattice coordinates of a cell; unused axes are 0.
using Cell = std::array<std::int64_t, 3>;

inline constexpr std::size_t kMaxCells = std::size_t{1} << 24;

/// A delta-discretized set: cell i sits at cells[i] * delta. Cells are kept
/// sorted lexicographically and distinct; weights, when present, sum to 1.
struct PointSet {
  int dim = 1;
  int level = 0;
  std::vector<Cell> cells;
  std::vector<double> weights;
  double nominal_dim = 0.0;
  /// Every coordinate satisfies |x| <= bound.
  double bound = 1.0;

  double delta() const;
  std::size_t size() const noexcept { return cells.size(); }
  bool weighted() const noexcept { return !weights.empty(); }
  double coordinate(std::size_t i, int axis) const;
  Vec3 point(std::size_t i) const;
};

/// Sorts, merges duplicate cells (summing weights) and checks the invariants.
/// Throws a capacity error above kMaxCells cells.
PointSet make_point_set(int dim, int level, std::vector<Cell> cells, std::vector<double> weights,
                        double nominal_dim, double bound = 1.0);

/// Attaches uniform weights 1 / #cells.
PointSet with_uniform_weights(PointSet p);

PointSet cantor_1d(double ratio, int depth);

/// Product of three 1-D sets, centered into [-1/2, 1/2)^3.
PointSet product_set(const PointSet& sx, const PointSet& sy, const PointSet& sz);

struct SimilarityMap {
  double ratio = 0.5;
  /// Row-major orthogonal matrix.
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 translation{0, 0, 0};
};

/// Cells hit by all depth-fold compositions applied to the origin (the lower
/// corner of [0,1]^dim).
PointSet ifs_attractor(std::span<const SimilarityMap> maps, int depth, double delta, int dim);

/// Solution s of sum r_i^s = 1.
double similarity_dimension(std::span<const SimilarityMap> maps);

/// Closed axis-aligned cube [corner, corner + side] on the delta-lattice.
struct CubeWitness {
  Vec3 corner{0, 0, 0};
  double side = 0.0;
};

struct DeltaSetReport {
  bool valid = false;
  double worst_constant = 0.0;
  CubeWitness witness;
};

/// Default verdict threshold: 2^dim, the number of aligned dyadic cubes of
/// side r that a closed lattice cube of side r can meet.
double default_validity_constant(int dim);

/// Lower bound on extraction output is content_estimate * delta^-s / 64.
inline constexpr double kExtractionSlackFactor = 64.0;

/// Exhaustive scan of every closed lattice cube of dyadic side delta <= r <= 1.
/// valid iff worst_constant <= constant (default_validity_constant when
/// constant <= 0).
DeltaSetReport validate_delta_s_set(const PointSet& p, double s, double constant = 0.0);

PointSet extract_delta_s_set(const PointSet& p, double s, double content_estimate);

struct FrostmanReport {
  double constant = 0.0;
  CubeWitness witness;
};

/// max over the same cubes of weight(Q) / r^nominal_dim (uniform weights when
/// the set carries none).
FrostmanReport frostman_check(const PointSet& p);

/// Random (delta, a)-set: top-down descent from the given level-0 root cubes,
/// each level-l node receiving a quota of at most floor(2^{(level-l)a}) cells,
/// split as evenly as possible over its children in random order.
PointSet random_delta_set(int dim, int level, double a, std::uint64_t seed, std::span<const Cell> roots);

void write_point_set_csv(std::ostream& out, const PointSet& p);
PointSet read_point_set_csv(std::istream& in, double nominal_dim = 0.0);

namespace detail {

struct WindowMax {
  double value = 0.0;
  Cell corner{0, 0, 0};
};

/// Largest sum of `values` over closed cubes [c, c + width]^dim of cells.
WindowMax max_window_sum(const PointSet& p, std::span<const double> values, std::int64_t width);

}  // namespace detail

}  // namespace projlab
