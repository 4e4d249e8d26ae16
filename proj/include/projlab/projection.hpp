#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "projlab/covering.hpp"
#include "projlab/curve.hpp"
#include "projlab/fractal.hpp"

namespace projlab {

/// {x . gamma(theta)} snapped to the delta-lattice, weights summed.
PointSet project_line(const PointSet& a, const Curve& curve, double theta);

/// Orthonormal basis of V_theta: e1 along the normal part of gamma'(theta),
/// e2 = gamma x e1.
struct PlaneFrame {
  Vec3 e1;
  Vec3 e2;
};
PlaneFrame plane_frame(const Curve& curve, double theta);
std::array<double, 2> plane_coordinates(const PlaneFrame& frame, const Vec3& x);

PointSet project_plane(const PointSet& a, const Curve& curve, double theta);

struct DimensionFit {
  std::vector<double> scales;
  std::vector<std::int64_t> counts;
  double slope = 0.0;
  double r2 = 1.0;
};

/// Least-squares slope of log2 N(r) against log2(1/r) over dyadic r in
/// [r_min, r_max].
DimensionFit box_dimension(const PointSet& p, double r_min, double r_max);

struct ScaleSelection {
  int level = 0;
  /// masses[j] = weight captured by the level-j intervals, j = 0..k_max.
  std::vector<double> masses;
};

/// Smallest j >= 1 whose level-j cubes capture mass >= 1 / (10 j^2). The
/// weights are those of `projected` (uniform when absent).
ScaleSelection select_scale(const Covering& cover, const PointSet& projected);

struct SweepRow {
  double theta = 0.0;
  double est_dim = 0.0;
  double r2 = 1.0;
  bool below_s = false;
};

struct SweepSummary {
  double s = 0.0;
  double alpha = 0.0;
  double bound = 0.0;
  double exceptional_fraction = 0.0;
  std::optional<DimensionFit> exceptional_dim_fit;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  SweepSummary summary;
};

/// max{0, 1 + (s - alpha) / 2}.
double exceptional_bound(double s, double alpha);

inline constexpr double kDefaultSweepMargin = 0.1;

/// theta_i = i / (theta_grid - 1); fit range [4 delta, 1/4].
SweepResult exceptional_sweep(const PointSet& a, const Curve& curve, double s, int theta_grid,
                              double margin = kDefaultSweepMargin, unsigned threads = 1);

}  // namespace projlab
