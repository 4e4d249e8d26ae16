#include "projlab/incidence.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

std::string to_string(IncidenceMode mode) { return mode == IncidenceMode::Unit ? "unit" : "rescaled"; }

IncidenceMode incidence_mode_from_string(const std::string& text) {
  if (text == "unit") return IncidenceMode::Unit;
  if (text == "rescaled") return IncidenceMode::Rescaled;
  fail(ErrorKind::Configuration, "unknown incidence mode: " + text);
}

bool Slab::contains(const Vec3& x, const Vec3& normal) const {
  return std::abs(dot(x, normal) - offset) <= thickness / 2 && dot(x, x) <= extent * extent;
}

SlabValidation validate_slab_family(const SlabFamily& family, double unit) {
  SlabValidation v;
  if (family.slabs.empty()) {
    v.count_ok = v.valid = true;
    return v;
  }
  const double extent = family.slabs.front().extent;
  v.count_constant = static_cast<double>(family.slabs.size()) * std::pow(unit / extent, family.s);
  std::vector<double> lower, upper;
  for (const auto& slab : family.slabs) {
    lower.push_back(slab.offset - slab.thickness / 2);
    upper.push_back(slab.offset + slab.thickness / 2);
  }
  std::sort(lower.begin(), lower.end());
  std::sort(upper.begin(), upper.end());
  const int levels = static_cast<int>(std::lround(std::log2(extent / unit)));
  for (int m = 0; m <= levels; ++m) {
    const double r = std::ldexp(unit, m);
    // Sliding a window right until its left end meets the nearest upper end
    // never loses a slab, so starts at floor(upper / unit) * unit suffice.
    for (const double u : upper) {
      const double start = std::floor(u / unit) * unit;
      const auto met = static_cast<std::size_t>(std::upper_bound(lower.begin(), lower.end(), start + r) - lower.begin()) -
                       static_cast<std::size_t>(std::lower_bound(upper.begin(), upper.end(), start) - upper.begin());
      const double ratio = static_cast<double>(met) / std::exp2(m * family.s);
      if (ratio > v.ball_condition_worst) {
        v.ball_condition_worst = ratio;
        v.witness_start = start;
        v.witness_length = r;
      }
    }
  }
  v.count_ok = v.count_constant <= kSlabFamilyConstant * (1.0 + kSlack);
  v.valid = v.count_ok && v.ball_condition_worst <= kSlabFamilyConstant * (1.0 + kSlack);
  return v;
}

SlabFamily slabs_from_covering(const Covering& cover, double theta, IncidenceMode mode) {
  if (cover.dim != 1) fail(ErrorKind::Configuration, "slab families need a 1-D covering");
  int level = -1;
  for (std::size_t k = 0; k < cover.cubes.size(); ++k) {
    if (cover.cubes[k].empty()) continue;
    if (level >= 0) fail(ErrorKind::Configuration, "slab families need a single-level covering");
    level = static_cast<int>(k);
  }
  SlabFamily family;
  family.theta = theta;
  family.s = cover.s;
  const int k_max = std::max(cover.k_max, std::max(level, 0));
  const double scale = mode == IncidenceMode::Unit ? 1.0 : std::ldexp(1.0, k_max);
  if (level >= 0) {
    const double width = dyadic(level);
    for (const auto& cube : cover.cubes[static_cast<std::size_t>(level)]) {
      family.slabs.push_back(
          {theta, (static_cast<double>(cube[0]) + 0.5) * width * scale, width * scale, scale});
    }
  }
  family.validation = validate_slab_family(family, mode == IncidenceMode::Unit ? dyadic(k_max) : 1.0);
  return family;
}

int IncidenceConfig::level() const { return level_of(delta); }

double IncidenceConfig::unit() const { return mode == IncidenceMode::Unit ? delta : 1.0; }

bool IncidenceMatrix::double_counting_holds() const {
  std::size_t rows_sum = 0, columns_sum = 0;
  for (const auto c : row_counts) rows_sum += c;
  for (const auto c : column_counts) columns_sum += c;
  return rows_sum == columns_sum && rows_sum == total();
}

namespace {

struct FamilyIndex {
  Vec3 normal;
  std::vector<double> lower;
  /// running maximum of the upper ends in lower-end order.
  std::vector<double> reach;
  double extent_sq = 0.0;

  bool hits(const Vec3& x) const {
    if (lower.empty() || dot(x, x) > extent_sq) return false;
    const double v = dot(x, normal);
    const auto it = std::upper_bound(lower.begin(), lower.end(), v);
    if (it == lower.begin()) return false;
    return reach[static_cast<std::size_t>(it - lower.begin()) - 1] >= v;
  }
};

std::vector<FamilyIndex> index_families(const IncidenceConfig& cfg) {
  if (cfg.families.size() != cfg.net.thetas.size()) {
    fail(ErrorKind::Configuration, "one slab family per direction is required");
  }
  std::vector<FamilyIndex> out;
  for (const auto& family : cfg.families) {
    FamilyIndex f;
    f.normal = cfg.curve(family.theta);
    std::vector<std::pair<double, double>> spans;
    double extent = INFINITY;
    for (const auto& slab : family.slabs) {
      spans.push_back({slab.offset - slab.thickness / 2, slab.offset + slab.thickness / 2});
      extent = std::min(extent, slab.extent);
    }
    std::sort(spans.begin(), spans.end());
    double reach = -INFINITY;
    for (const auto& [lo, hi] : spans) {
      reach = std::max(reach, hi);
      f.lower.push_back(lo);
      f.reach.push_back(reach);
    }
    f.extent_sq = extent * extent;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

IncidenceMatrix incidence_count(const IncidenceConfig& cfg, unsigned threads) {
  const auto families = index_families(cfg);
  const std::size_t rows = cfg.balls.size();
  constexpr std::size_t kBlock = 1024;
  const std::size_t blocks = (rows + kBlock - 1) / kBlock;
  std::vector<std::vector<std::uint32_t>> block_columns(blocks);
  std::vector<std::vector<std::size_t>> block_counts(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t end = std::min(rows, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const Vec3 x = cfg.balls.point(i);
      std::size_t count = 0;
      for (std::size_t j = 0; j < families.size(); ++j) {
        if (families[j].hits(x)) {
          block_columns[b].push_back(static_cast<std::uint32_t>(j));
          ++count;
        }
      }
      block_counts[b].push_back(count);
    }
  });

  IncidenceMatrix m;
  m.row_offsets.reserve(rows + 1);
  m.row_offsets.push_back(0);
  for (std::size_t b = 0; b < blocks; ++b) {
    m.columns.insert(m.columns.end(), block_columns[b].begin(), block_columns[b].end());
    for (const auto c : block_counts[b]) {
      m.row_counts.push_back(c);
      m.row_offsets.push_back(m.row_offsets.back() + c);
    }
  }
  m.column_counts.assign(families.size(), 0);
  for (const auto j : m.columns) ++m.column_counts[j];
  return m;
}

namespace {

bool is_heavy(std::size_t row_count, std::size_t theta_count, int level) {
  const auto logs = static_cast<std::size_t>(std::max(level, 1));
  return row_count * logs * logs >= theta_count;
}

}  // namespace

PointSet heavy_subset(const IncidenceMatrix& m, const IncidenceConfig& cfg) {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (is_heavy(m.row_counts[i], cfg.net.size(), cfg.level())) cells.push_back(cfg.balls.cells[i]);
  }
  return make_point_set(cfg.balls.dim, cfg.balls.level, std::move(cells), {}, cfg.balls.nominal_dim, cfg.balls.bound);
}

IncidenceReport verify_incidence_bound(const IncidenceConfig& cfg, double epsilon, double ceiling, unsigned threads) {
  const auto m = incidence_count(cfg, threads);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (!is_heavy(m.row_counts[i], cfg.net.size(), cfg.level())) {
      const Vec3 x = cfg.balls.point(i);
      fail(ErrorKind::Precondition, fmt::format("ball ({}, {}, {}) meets {} of {} directions; below the heaviness threshold",
                                                x[0], x[1], x[2], m.row_counts[i], cfg.net.size()));
    }
  }
  IncidenceReport r;
  r.theta_count = cfg.net.size();
  r.heavy_count = cfg.balls.size();
  const double theta = static_cast<double>(r.theta_count);
  r.lhs = theta * theta * theta * theta * static_cast<double>(r.heavy_count);
  r.rhs = std::pow(cfg.delta, -(2.0 * cfg.t + cfg.s + 2.0 + epsilon));
  r.fitted_C = r.lhs / r.rhs;
  r.violation = r.fitted_C > ceiling;
  return r;
}

IncidenceConfig rescale_config(const IncidenceConfig& cfg) {
  if (cfg.mode != IncidenceMode::Unit) fail(ErrorKind::Configuration, "config is already rescaled");
  IncidenceConfig out = cfg;
  out.mode = IncidenceMode::Rescaled;
  const double scale = std::ldexp(1.0, cfg.level());
  for (auto& family : out.families) {
    for (auto& slab : family.slabs) {
      slab.offset *= scale;
      slab.thickness *= scale;
      slab.extent *= scale;
    }
    family.validation = validate_slab_family(family, 1.0);
  }
  out.balls = make_point_set(cfg.balls.dim, 0, cfg.balls.cells, cfg.balls.weights, cfg.balls.nominal_dim,
                             cfg.balls.bound * scale);
  return out;
}

IncidenceConfig random_config(const Curve& curve, int level, double s, double t, std::uint64_t seed) {
  if (level < 1) fail(ErrorKind::Domain, "incidence experiments need delta <= 1/2");
  if (!(s > 0.0 && s < 1.0)) fail(ErrorKind::Domain, "slab exponent s must lie in (0, 1)");
  IncidenceConfig cfg;
  cfg.delta = dyadic(level);
  cfg.s = s;
  cfg.t = t;
  cfg.seed = seed;
  cfg.generator = "random";
  cfg.curve = curve;
  cfg.net = direction_net(curve, cfg.delta, t, Rng(seed, 1).next());

  const std::int64_t edge = std::int64_t{1} << level;
  std::vector<Cell> grid;
  for (std::int64_t i = -edge; i < edge; ++i) grid.push_back({i, 0, 0});
  for (std::size_t i = 0; i < cfg.net.size(); ++i) {
    Rng rng(seed, 1000 + i);
    std::vector<double> weights(grid.size());
    double total = 0.0;
    for (auto& w : weights) total += (w = rng.uniform());
    for (auto& w : weights) w /= total;
    const auto weighted = make_point_set(1, level, grid, std::move(weights), 1.0);
    const auto offsets = extract_delta_s_set(weighted, s, 1.0);
    SlabFamily family;
    family.theta = cfg.net.thetas[i];
    family.s = s;
    for (const auto& cell : offsets.cells) {
      family.slabs.push_back({family.theta, (static_cast<double>(cell[0]) + 0.5) * cfg.delta, cfg.delta, 1.0});
    }
    family.validation = validate_slab_family(family, cfg.delta);
    cfg.families.push_back(std::move(family));
  }

  const double a = std::clamp(2.0 + s - 2.0 * t, 0.0, 3.0);
  std::vector<Cell> roots;
  for (std::int64_t x : {-1, 0})
    for (std::int64_t y : {-1, 0})
      for (std::int64_t z : {-1, 0}) roots.push_back({x, y, z});
  const auto candidates = random_delta_set(3, level, a, Rng(seed, 2).next(), roots);
  std::vector<Cell> inside;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Vec3 x = candidates.point(i);
    if (dot(x, x) <= 1.0) inside.push_back(candidates.cells[i]);
  }
  cfg.balls = make_point_set(3, level, std::move(inside), {}, a);
  return cfg;
}

IncidenceConfig origin_config(const Curve& curve, int level, double s) {
  IncidenceConfig cfg;
  cfg.delta = dyadic(level);
  cfg.s = s;
  cfg.t = 1.0;
  cfg.generator = "origin";
  cfg.curve = curve;
  cfg.net = direction_net(curve, cfg.delta, 1.0, 0);
  for (const double theta : cfg.net.thetas) {
    SlabFamily family;
    family.theta = theta;
    family.s = s;
    family.slabs.push_back({theta, 0.0, cfg.delta, 1.0});
    family.validation = validate_slab_family(family, cfg.delta);
    cfg.families.push_back(std::move(family));
  }
  cfg.balls = make_point_set(3, level, {{0, 0, 0}}, {}, 0.0);
  return cfg;
}

IncidenceRun run_incidence(const IncidenceConfig& cfg, double epsilon, double ceiling, unsigned threads) {
  IncidenceRun run;
  const auto m = incidence_count(cfg, threads);
  run.double_counting = m.double_counting_holds();
  run.candidate_balls = cfg.balls.size();
  IncidenceConfig heavy = cfg;
  heavy.balls = heavy_subset(m, cfg);
  run.report = verify_incidence_bound(heavy, epsilon, ceiling, threads);
  return run;
}

nlohmann::json incidence_report_to_json(const IncidenceReport& report) {
  return {{"lhs", report.lhs},
          {"rhs", report.rhs},
          {"fitted_C", report.fitted_C},
          {"heavy_count", report.heavy_count},
          {"theta_count", report.theta_count}};
}

IncidenceConfig incidence_config_from_json(const nlohmann::json& j) {
  try {
    const double delta = j.at("delta").get<double>();
    const int level = level_of(delta);
    const std::string generator = j.value("generator", std::string("random"));
    const Curve curve = curve_by_name(j.value("curve", std::string("model")));
    const double s = j.at("s").get<double>();
    IncidenceConfig cfg;
    if (generator == "random") {
      cfg = random_config(curve, level, s, j.at("t").get<double>(), j.value("seed", std::uint64_t{0}));
    } else if (generator == "origin") {
      cfg = origin_config(curve, level, s);
    } else {
      fail(ErrorKind::Configuration, "unknown incidence generator: " + generator);
    }
    if (incidence_mode_from_string(j.value("mode", std::string("unit"))) == IncidenceMode::Rescaled) {
      cfg = rescale_config(cfg);
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, std::string("malformed incidence config: ") + e.what());
  }
}

}  // namespace projlab
