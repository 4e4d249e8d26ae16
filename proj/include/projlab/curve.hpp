#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "projlab/vec3.hpp"

namespace projlab {

/// A direction curve theta -> S^2 on the parameter interval [0, 1].
///
/// The map is stored without a domain restriction so that finite differences
/// can step slightly past the endpoints; the public evaluators enforce
/// 0 <= theta <= 1. Derivatives are closed-form when supplied, otherwise
/// central differences (step `h` for the first derivative, `h2` for the
/// second, which needs a larger step to stay clear of roundoff).
class Curve {
 public:
  using Map = std::function<Vec3(double)>;

  static constexpr double kDefaultStep = 0x1p-20;
  static constexpr double kDefaultSecondStep = 0x1p-10;

  Curve(std::string label, Map eval, Map d1 = {}, Map d2 = {}, double h = kDefaultStep,
        double h2 = kDefaultSecondStep);

  Vec3 operator()(double theta) const;
  Vec3 derivative(double theta) const;
  Vec3 second_derivative(double theta) const;

  /// Same curve with both derivatives replaced by finite differences.
  Curve with_finite_differences() const;

  const std::string& label() const noexcept { return label_; }
  bool closed_form() const noexcept { return static_cast<bool>(d1_) && static_cast<bool>(d2_); }
  double step() const noexcept { return h_; }

  /// Unit-norm tolerance matching how the curve is produced.
  double norm_tolerance() const noexcept { return closed_form() ? 1e-10 : 1e-6; }

  /// Unchecked evaluation, valid slightly outside [0, 1].
  Vec3 raw(double theta) const { return eval_(theta); }

 private:
  std::string label_;
  Map eval_;
  Map d1_;
  Map d2_;
  double h_;
  double h2_;
};

/// theta -> (cos theta, sin theta, 1) / sqrt 2.
Curve model_curve();
/// theta -> normalize(cos theta, sin theta, 1 + 0.2 theta).
Curve helix_curve();
/// theta -> (cos theta, sin theta, 0); degenerate (negative control).
Curve great_circle();

struct CurveTableRow {
  double theta;
  Vec3 point;
};

/// Not-a-knot cubic spline through the table rows, normalized onto the sphere.
/// Rows must be sorted by theta, at least 4 of them, spanning [0, 1].
Curve curve_from_table(std::span<const CurveTableRow> rows, std::string label = "table");
/// Reads `theta,x,y,z` rows (an optional non-numeric header line is skipped).
Curve load_curve_table(const std::filesystem::path& path);

/// "model", "helix", "greatcircle", or a path to a CSV table.
Curve curve_by_name(const std::string& name);

Vec3 eval_curve(const Curve& curve, double theta);

/// min over a uniform n_samples grid of |det(gamma, gamma', gamma'')|.
double nondegeneracy_margin(const Curve& curve, int n_samples);

/// A delta-separated set of parameters satisfying the (delta, t) counting
/// condition. `constant` is the exhaustively measured worst ratio
/// count / (r/delta)^t; `cardinality_constant` is #thetas divided by
/// (log2 1/delta)^-2 delta^-t.
struct DirectionNet {
  int level = 0;
  double t = 0.0;
  std::vector<double> thetas;
  double constant = 0.0;
  double cardinality_constant = 0.0;

  double delta() const;
  std::size_t size() const noexcept { return thetas.size(); }
};

struct NetCheck {
  double worst_constant = 0.0;
  double witness_start = 0.0;
  double witness_length = 0.0;
};

DirectionNet direction_net(const Curve& curve, double delta, double t, std::uint64_t seed);

/// Exhaustive scan over all dyadic window lengths delta <= r <= 1 and all
/// window positions on the delta-grid.
NetCheck check_net(std::span<const double> thetas, int level, double t);

namespace detail {

/// Seeded greedy thinning of the index range [0, count): indices are visited
/// in a random order and accepted while every enclosing dyadic bucket (of
/// `levels` levels, bucket of index i at level l is min(i, 2^levels - 1) >>
/// (levels - l)) stays within counting_cap(levels - l, t). Returns sorted
/// indices.
std::vector<std::int64_t> thin_grid(std::int64_t count, int levels, double t, std::uint64_t seed);

/// Worst ratio count / w^t over closed windows [c, c + w - 1 + closed] of
/// sorted integer positions, w = 2^m for m = 0..levels. With closed = true a
/// window of length w covers w + 1 lattice positions.
struct WindowWorst {
  double ratio = 0.0;
  std::int64_t start = 0;
  std::int64_t width = 1;
};
WindowWorst worst_window_1d(std::span<const std::int64_t> sorted, int levels, double t, bool closed);

}  // namespace detail

}  // namespace projlab
