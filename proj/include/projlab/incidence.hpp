#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "projlab/covering.hpp"
#include "projlab/curve.hpp"
#include "projlab/fractal.hpp"

namespace projlab {

enum class IncidenceMode { Unit, Rescaled };

std::string to_string(IncidenceMode mode);
IncidenceMode incidence_mode_from_string(const std::string& text);

struct Slab {
  double theta = 0.0;
  double offset = 0.0;
  double thickness = 0.0;
  double extent = 1.0;

  /// |x . normal - offset| <= thickness / 2 and |x| <= extent.
  bool contains(const Vec3& x, const Vec3& normal) const;
};

struct SlabValidation {
  /// #slabs * (unit / extent)^s.
  double count_constant = 0.0;
  /// max over windows of length r of #{slabs meeting it} / (r / unit)^s.
  double ball_condition_worst = 0.0;
  double witness_start = 0.0;
  double witness_length = 0.0;
  bool count_ok = false;
  bool valid = false;
};

inline constexpr double kSlabFamilyConstant = 64.0;

struct SlabFamily {
  double theta = 0.0;
  std::vector<Slab> slabs;
  double s = 0.0;
  SlabValidation validation;
};

/// Exhaustive scan over dyadic r in [unit, extent] and window starts on the
/// unit lattice. unit is delta at unit scale and 1 after rescaling.
SlabValidation validate_slab_family(const SlabFamily& family, double unit);

/// One slab per interval of a single-level 1-D covering; throws a
/// configuration error for multi-level coverings.
SlabFamily slabs_from_covering(const Covering& cover, double theta, IncidenceMode mode);

struct IncidenceConfig {
  double delta = 0.0;
  IncidenceMode mode = IncidenceMode::Unit;
  double s = 0.0;
  double t = 0.0;
  std::uint64_t seed = 0;
  std::string generator;
  Curve curve = model_curve();
  DirectionNet net;
  /// families[i] belongs to net.thetas[i].
  std::vector<SlabFamily> families;
  /// delta-cells (unit scale) or unit cells of B(0, 1/delta) (rescaled).
  PointSet balls;

  int level() const;
  /// Lattice spacing of the balls: delta, or 1 after rescaling.
  double unit() const;
};

/// CSR relation: row x lists the direction indices theta with x in some slab
/// of S_theta. column_counts is accumulated independently of row_counts.
struct IncidenceMatrix {
  std::vector<std::size_t> row_offsets;
  std::vector<std::uint32_t> columns;
  std::vector<std::size_t> row_counts;
  std::vector<std::size_t> column_counts;

  std::size_t total() const noexcept { return columns.size(); }
  std::size_t rows() const noexcept { return row_counts.size(); }
  /// sum of row counts == sum of column counts == total.
  bool double_counting_holds() const;
  friend bool operator==(const IncidenceMatrix&, const IncidenceMatrix&) = default;
};

IncidenceMatrix incidence_count(const IncidenceConfig& cfg, unsigned threads = 1);

/// Balls with #U_x >= (log2 1/delta)^-2 #Theta.
PointSet heavy_subset(const IncidenceMatrix& m, const IncidenceConfig& cfg);

inline constexpr double kDefaultIncidenceEpsilon = 0.1;
inline constexpr double kDefaultFittedCeiling = 65536.0;

struct IncidenceReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double fitted_C = 0.0;
  std::size_t heavy_count = 0;
  std::size_t theta_count = 0;
  bool violation = false;
};

/// lhs = #Theta^4 #H, rhs = delta^-(2t + s + 2 + epsilon). Throws a
/// precondition error naming the first ball that is not heavy.
IncidenceReport verify_incidence_bound(const IncidenceConfig& cfg, double epsilon = kDefaultIncidenceEpsilon,
                                       double ceiling = kDefaultFittedCeiling, unsigned threads = 1);

IncidenceConfig rescale_config(const IncidenceConfig& cfg);

/// Net from direction_net; per direction, slab offsets from
/// extract_delta_s_set applied to a randomly weighted delta-grid of [-1, 1);
/// balls a random (delta, 2 + s - 2t)-set in B(0, 1).
IncidenceConfig random_config(const Curve& curve, int level, double s, double t, std::uint64_t seed);

/// Full net (t = 1), one delta-slab through the origin per direction, one
/// ball at the origin.
IncidenceConfig origin_config(const Curve& curve, int level, double s);

struct IncidenceRun {
  IncidenceReport report;
  std::size_t candidate_balls = 0;
  bool double_counting = false;
};

/// incidence_count, heavy_subset, then verify_incidence_bound on the heavy
/// balls.
IncidenceRun run_incidence(const IncidenceConfig& cfg, double epsilon = kDefaultIncidenceEpsilon,
                           double ceiling = kDefaultFittedCeiling, unsigned threads = 1);

nlohmann::json incidence_report_to_json(const IncidenceReport& report);

/// Builds a config from {delta, mode, s, t, seed, curve, generator}; generator
/// is "random" or "origin", mode "unit" or "rescaled".
IncidenceConfig incidence_config_from_json(const nlohmann::json& j);

}  // namespace projlab
