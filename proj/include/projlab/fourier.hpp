#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "projlab/curve.hpp"
#include "projlab/incidence.hpp"

namespace projlab {

using Complex = std::complex<double>;

/// Periodic samples on [0, n * spacing)^3, index (i * n + j) * n + k for the
/// point spacing * (i, j, k).
struct GridFunction {
  int n = 0;
  double spacing = 1.0;
  std::vector<Complex> samples;

  static GridFunction zeros(int n, double spacing = 1.0);
  double length() const noexcept { return n * spacing; }
  std::size_t size() const noexcept { return samples.size(); }
};

/// Coefficients c_k, k in [-n/2, n/2)^3 stored with FFT wrap-around, such
/// that f(x) = sum_k c_k exp(2 pi i k . x / L). Frequency of k is k / L.
struct Spectrum {
  int n = 0;
  double length = 0.0;
  std::vector<Complex> coefficients;

  std::size_t index(std::int64_t kx, std::int64_t ky, std::int64_t kz) const;
  /// Signed wave numbers of storage position i.
  std::array<std::int64_t, 3> wave_numbers(std::size_t i) const;
};

Spectrum spectrum(const GridFunction& f);
GridFunction synthesize(const Spectrum& c, double spacing);

/// sum |f|^2 and n^3 sum |c|^2 relative difference.
double parseval_error(const GridFunction& f);

/// sum over the grid of |g|^4.
double l4_norm(const GridFunction& g);

double max_abs(const GridFunction& g);
/// max |a - b| pointwise.
double max_difference(const GridFunction& a, const GridFunction& b);

/// Cone geometry on the grid of 2/delta samples per axis, spacing 1/2,
/// physical box [0, 1/delta)^3, frequencies delta Z^3 in [-1, 1)^3.
struct ConeGeometry {
  Curve curve = model_curve();
  int level = 0;
  double radial_floor = 0.5;
  int shells = 1;
  /// per grid storage index: cap id (shell * M + direction index) or -1.
  std::vector<std::int32_t> cap_of_point;
  std::vector<std::size_t> points_per_cap;
  /// largest number of geometric caps (delta-neighborhoods of the cone over
  /// [i delta, (i+1) delta]) containing one lattice point.
  int max_overlap = 0;
  /// sigma planks have angular width 2^-sigma_level.
  int sigma_level = 0;
  /// tau_s planks for s = 2^-m, m = 0..tau_levels-1.
  int tau_levels = 0;

  double delta() const;
  int M() const noexcept { return 1 << level; }
  int grid() const noexcept { return 2 << level; }
  double spacing() const noexcept { return 0.5; }
  int direction_count() const noexcept { return M(); }
  int cap_count() const noexcept { return M() * shells; }
  int direction_of_cap(int cap) const noexcept { return cap % M(); }
  int sigma_of_cap(int cap) const noexcept { return direction_of_cap(cap) >> (level - sigma_level); }
  int sigma_count() const noexcept { return 1 << sigma_level; }
  /// tau_s index (s = 2^-m) containing a sigma plank.
  int tau_of_sigma(int sigma, int m) const noexcept { return sigma >> (sigma_level - m); }
  int tau_count(int m) const noexcept { return 1 << m; }
  std::vector<int> sigmas_in_tau(int m, int tau) const;

  /// Frame (e_r, e_t, e_n) at the center direction of a tau_s plank.
  std::array<Vec3, 3> tau_frame(int m, int tau) const;
};

/// radial_floor is 1/2 or 1/K for a power of two K >= 2.
ConeGeometry build_geometry(const Curve& curve, double delta, double radial_floor = 0.5, unsigned threads = 1);

nlohmann::json geometry_to_json(const ConeGeometry& g);

/// Lattice point (wave numbers) inside tau_theta: |xi . gamma| <= 1 and
/// distance to the line R gamma(theta) at most delta.
bool in_tube(const ConeGeometry& g, double theta, const std::array<std::int64_t, 3>& k);

/// Raised-cosine window in u = xi . gamma: 1 for |u| <= 1/2, 0 at |u| = 1.
double tube_window(double u);

/// f_theta with coefficients omega(xi) sum_S exp(-2 pi i c_S xi . gamma),
/// omega normalized to sum 1 over the tube. The family must be rescaled
/// (offsets in physical units) and theta a multiple of delta.
GridFunction synth_tube_function(const SlabFamily& family, const ConeGeometry& g);

struct TubeProfile {
  /// min |f| over the slab cores: |x . gamma - c_S| <= 1/4 and transverse
  /// distance <= M/8 (periodic representatives).
  double core_min = 0.0;
  /// max |f| over the same transverse range at distance >= 4 from every slab.
  double off_max = 0.0;
};

TubeProfile tube_profile(const GridFunction& f, const SlabFamily& family, const ConeGeometry& g);

struct KChoice {
  std::int64_t K = 2;
  double raw = 0.0;
  bool clamped = false;
};

/// Power of two nearest (log2 1/delta)^{2/(1-s)}, clamped to [2, 2^floor(n/2)].
KChoice choose_K(double delta, double s);

/// eta_low(u) = 1 for |u| <= 1/(2K), 0 for |u| >= 1/K, raised cosine between.
double eta_low(double u, std::int64_t K);

struct HighLow {
  GridFunction high;
  GridFunction low;
};

HighLow high_low_split(const GridFunction& f, double theta, std::int64_t K, const ConeGeometry& g);

struct LowEnvelope {
  double max_low = 0.0;
  double scale = 0.0;
  /// max |sum_theta f_theta,low| / (K^{s-1} #Theta).
  double constant = 0.0;
};

/// Sums the low parts of the tube functions of every family of a rescaled
/// config and fits the envelope constant.
LowEnvelope low_envelope(const IncidenceConfig& cfg, std::int64_t K, const ConeGeometry& g);

Spectrum cap_restrict_spectrum(const Spectrum& c, int cap, const ConeGeometry& g);
GridFunction cap_restrict(const GridFunction& f, int cap, const ConeGeometry& g);

struct CapSelection {
  std::vector<int> caps;
  double t = 0.0;
  double constant = 0.0;
  /// Witness window of directions [start, start + width) in cap units.
  std::int64_t witness_start = 0;
  std::int64_t witness_width = 1;
  bool valid = false;
};

inline constexpr double kSpacingConstant = 64.0;

/// Direction indices forming a (delta, t)-set, checked over half-open
/// windows of r/delta caps for every dyadic r.
CapSelection tspacing_subsample(const ConeGeometry& g, double t, std::uint64_t seed);
CapSelection check_tspacing(const ConeGeometry& g, std::vector<int> caps, double t);

/// Unit-modulus coefficients with independent uniform phases on every lattice
/// point assigned to the given caps.
GridFunction random_cap_function(const ConeGeometry& g, const std::vector<int>& caps, std::uint64_t seed);

struct DecouplingReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

DecouplingReport decoupling_ratio(const GridFunction& f, const std::vector<int>& caps, double t, double delta,
                                  const ConeGeometry& g);

struct EnvelopeTerm {
  int m = 0;
  int tau = 0;
  std::array<std::int64_t, 3> box{0, 0, 0};
  double square_sum = 0.0;
  std::size_t volume = 0;
};

struct EnvelopeReport {
  std::vector<EnvelopeTerm> terms;
  double total = 0.0;
  double l4 = 0.0;
  /// l4 / total, 0 when f = 0.
  double quotient = 0.0;
};

EnvelopeReport wave_envelope_rhs(const GridFunction& f, const ConeGeometry& g);

/// Spectrum coefficients outside the allowed set larger than this fraction of
/// the largest coefficient count as leakage.
inline constexpr double kLeakTolerance = 1e-9;

}  // namespace projlab
