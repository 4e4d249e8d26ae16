#include "projlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "projlab/covering.hpp"
#include "projlab/curve.hpp"
#include "projlab/dyadic.hpp"
#include "projlab/fourier.hpp"
#include "projlab/fractal.hpp"
#include "projlab/incidence.hpp"
#include "projlab/parallel.hpp"
#include "projlab/projection.hpp"
#include "projlab/svg.hpp"

namespace projlab {

using nlohmann::json;

double parse_scale(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text.rfind("2^", 0) == 0) {
      try {
        std::size_t used = 0;
        const int power = std::stoi(text.substr(2), &used);
        if (used + 2 == text.size()) return std::ldexp(1.0, power);
      } catch (const std::exception&) {
      }
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
  }
  fail(ErrorKind::Configuration, fmt::format("not a scale: {}", value.dump()));
}

json to_json(const RunConfig& cfg) {
  return {{"command", cfg.command},   {"curve", cfg.curve},     {"delta", cfg.delta},
          {"s", cfg.s},               {"t", cfg.t},             {"alpha", cfg.alpha},
          {"theta_grid", cfg.theta_grid}, {"seed", cfg.seed},   {"seeds", cfg.seeds},
          {"deltas", cfg.deltas},     {"generator", cfg.generator}, {"ratio", cfg.ratio},
          {"dim", cfg.dim},           {"a", cfg.a},             {"epsilon", cfg.epsilon},
          {"min_level", cfg.min_level}, {"margin", cfg.margin}, {"mode", cfg.mode},
          {"out", cfg.out.generic_string()}};
}

namespace {

RunConfig defaults(const std::string& command) {
  RunConfig cfg;
  cfg.command = command;
  if (command == "gen") {
    cfg.delta = dyadic(8);
    cfg.generator = "cantor";
  } else if (command == "cover") {
    cfg.delta = dyadic(8);
    cfg.generator = "cantor";
    cfg.s = 0.8;
    cfg.epsilon = 1.0;
  } else if (command == "sweep") {
    cfg.delta = dyadic(10);
    cfg.generator = "cantor3";
    cfg.s = 1.0;
  } else if (command == "incidence") {
    cfg.delta = dyadic(4);
    cfg.deltas = {dyadic(4), dyadic(5), dyadic(6)};
    cfg.generator = "random";
    cfg.epsilon = kDefaultIncidenceEpsilon;
  } else if (command == "decouple") {
    cfg.delta = dyadic(4);
    cfg.deltas = {dyadic(4), dyadic(5), dyadic(6)};
    cfg.generator = "random";
  } else {
    fail(ErrorKind::Configuration, fmt::format("unknown command '{}'", command));
  }
  return cfg;
}

template <class T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Configuration, fmt::format("bad value for '{}': {}", key, value.dump()));
  }
}

void apply(RunConfig& cfg, const std::string& key, const json& value) {
  if (key == "command") {
    if (get_as<std::string>(value, key) != cfg.command) fail(ErrorKind::Configuration, "config command does not match");
  } else if (key == "curve") {
    cfg.curve = get_as<std::string>(value, key);
  } else if (key == "delta") {
    cfg.delta = parse_scale(value);
  } else if (key == "deltas") {
    if (!value.is_array()) fail(ErrorKind::Configuration, "'deltas' must be a list");
    cfg.deltas.clear();
    for (const auto& v : value) cfg.deltas.push_back(parse_scale(v));
  } else if (key == "s") {
    cfg.s = get_as<double>(value, key);
  } else if (key == "t") {
    cfg.t = get_as<double>(value, key);
  } else if (key == "alpha") {
    cfg.alpha = get_as<double>(value, key);
  } else if (key == "theta_grid") {
    cfg.theta_grid = get_as<int>(value, key);
  } else if (key == "seed") {
    cfg.seed = get_as<std::uint64_t>(value, key);
  } else if (key == "seeds") {
    cfg.seeds = get_as<int>(value, key);
  } else if (key == "generator") {
    cfg.generator = get_as<std::string>(value, key);
  } else if (key == "ratio") {
    cfg.ratio = get_as<double>(value, key);
  } else if (key == "dim") {
    cfg.dim = get_as<int>(value, key);
  } else if (key == "a") {
    cfg.a = get_as<double>(value, key);
  } else if (key == "epsilon") {
    cfg.epsilon = get_as<double>(value, key);
  } else if (key == "min_level") {
    cfg.min_level = get_as<int>(value, key);
  } else if (key == "margin") {
    cfg.margin = get_as<double>(value, key);
  } else if (key == "mode") {
    cfg.mode = get_as<std::string>(value, key);
  } else if (key == "out") {
    cfg.out = get_as<std::string>(value, key);
  } else {
    fail(ErrorKind::Configuration, fmt::format("unknown config key '{}'", key));
  }
}

void check(const RunConfig& cfg) {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) fail(ErrorKind::Configuration, message);
  };
  (void)level_of(cfg.delta);
  for (const double d : cfg.deltas) (void)level_of(d);
  require(cfg.theta_grid >= 2, "theta_grid must be at least 2");
  require(cfg.seeds >= 1, "seeds must be at least 1");
  require(cfg.dim >= 1 && cfg.dim <= 3, "dim must be 1, 2 or 3");
  require(cfg.t >= 0.0 && cfg.t <= 1.0, "t must lie in [0, 1]");
  require(cfg.mode == "unit" || cfg.mode == "rescaled", "mode must be unit or rescaled");
  const std::string& c = cfg.command;
  if (c == "gen" || c == "cover" || c == "sweep") {
    static const std::set<std::string> generators{"cantor", "cantor3", "random", "grid"};
    require(generators.count(cfg.generator) == 1, fmt::format("unknown generator '{}'", cfg.generator));
  }
  if (c == "cover") require(cfg.s > 0.0 && cfg.s <= 3.0 && cfg.epsilon > 0.0, "cover needs s > 0 and epsilon > 0");
  if (c == "sweep") require(cfg.s > 0.0 && cfg.s <= 1.0, "sweep needs s in (0, 1]");
  if (c == "incidence") {
    require(cfg.generator == "random" || cfg.generator == "origin", "incidence generator must be random or origin");
    require(cfg.s > 0.0 && cfg.s < 1.0, "incidence needs s in (0, 1)");
    require(!cfg.deltas.empty(), "deltas must not be empty");
  }
  if (c == "decouple") require(!cfg.deltas.empty(), "deltas must not be empty");
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

// ---- point sets ----

PointSet full_grid(int dim, int level) {
  const std::int64_t side = std::int64_t{1} << level;
  std::int64_t count = 1;
  for (int i = 0; i < dim; ++i) {
    count *= side;
    if (count > static_cast<std::int64_t>(kMaxCells)) fail(ErrorKind::Capacity, "grid above the cell limit");
  }
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    Cell c{0, 0, 0};
    std::int64_t rest = i;
    for (int a = 0; a < dim; ++a) {
      c[static_cast<std::size_t>(a)] = rest % side;
      rest /= side;
    }
    cells.push_back(c);
  }
  return with_uniform_weights(make_point_set(dim, level, std::move(cells), {}, dim));
}

PointSet cantor_at(double ratio, int level) {
  if (!(ratio > 0.0 && ratio < 0.5)) fail(ErrorKind::Configuration, "cantor ratio must lie in (0, 1/2)");
  const int depth = static_cast<int>(std::lround(level / std::log2(1.0 / ratio)));
  PointSet p = cantor_1d(ratio, std::max(depth, 1));
  if (p.level != level) {
    fail(ErrorKind::Configuration, fmt::format("cantor ratio {} has no depth with delta = 2^-{}", ratio, level));
  }
  return p;
}

PointSet make_set(const RunConfig& cfg) {
  const int level = level_of(cfg.delta);
  if (cfg.generator == "cantor") return cantor_at(cfg.ratio, level);
  if (cfg.generator == "cantor3") {
    const PointSet c = cantor_at(cfg.ratio, level);
    return product_set(c, c, c);
  }
  if (cfg.generator == "grid") return full_grid(cfg.dim, level);
  const std::vector<Cell> roots{Cell{0, 0, 0}};
  return random_delta_set(cfg.dim, level, cfg.a, cfg.seed, roots);
}

std::string point_set_csv(const PointSet& p) {
  std::ostringstream out;
  write_point_set_csv(out, p);
  return out.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_low(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)))];
}

// Least-squares slope of ys against xs.
double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

json fit_json(const DimensionFit& fit) {
  return {{"scales", fit.scales}, {"counts", fit.counts}, {"slope", fit.slope}, {"r2", fit.r2}};
}

// ---- commands ----

RunResult run_gen(const RunConfig& cfg) {
  const PointSet p = make_set(cfg);
  RunResult r;
  r.files["points.csv"] = point_set_csv(p);
  json results{{"points", p.size()}, {"dim", p.dim}, {"delta", p.delta()}, {"nominal_dim", p.nominal_dim}};
  if (p.level >= 6) results["box_dimension"] = fit_json(box_dimension(p, 4 * p.delta(), 0.25));
  const auto validity = validate_delta_s_set(p, cfg.s);
  results["validate"] = {{"s", cfg.s}, {"valid", validity.valid}, {"worst_constant", validity.worst_constant}};
  r.summary = results;

  Plot plot;
  plot.title = fmt::format("{} set, {} points", cfg.generator, p.size());
  plot.x_label = "x1";
  plot.y_label = p.dim >= 2 ? "x2" : "index";
  PlotSeries s;
  s.scatter = true;
  for (std::size_t i = 0; i < p.size() && i < 20000; ++i) {
    s.xs.push_back(p.coordinate(i, 0));
    s.ys.push_back(p.dim >= 2 ? p.coordinate(i, 1) : static_cast<double>(i));
  }
  plot.series.push_back(std::move(s));
  r.files["points.svg"] = render_svg(plot);
  return r;
}

RunResult run_cover(const RunConfig& cfg) {
  const PointSet p = make_set(cfg);
  const Covering c = greedy_cover(p, cfg.s, cfg.epsilon, cfg.min_level);
  const CoveringReport report = validate_covering(c, &p);
  RunResult r;
  r.files["covering.json"] = dump(covering_to_json(c));
  std::string levels = "k,cubes\n";
  PlotSeries counts;
  counts.label = "cubes per level";
  for (int k = 0; k <= c.k_max; ++k) {
    const auto n = c.cubes[static_cast<std::size_t>(k)].size();
    levels += fmt::format("{},{}\n", k, n);
    counts.xs.push_back(k);
    counts.ys.push_back(static_cast<double>(n));
  }
  r.files["levels.csv"] = levels;
  r.summary = {{"points", p.size()},
               {"cubes", c.cube_count()},
               {"k_max", c.k_max},
               {"cover_ok", report.cover_ok},
               {"disjoint", report.disjoint},
               {"budget_ok", report.budget_ok},
               {"budget_value", report.budget_value},
               {"worst_condition3_ratio", report.worst_condition3_ratio},
               {"valid", report.valid()}};
  Plot plot;
  plot.title = fmt::format("greedy covering, s = {}", cfg.s);
  plot.x_label = "level k";
  plot.y_label = "cubes";
  plot.series.push_back(std::move(counts));
  r.files["levels.svg"] = render_svg(plot);
  return r;
}

RunResult run_sweep(const RunConfig& cfg, unsigned threads) {
  const PointSet p = make_set(cfg);
  if (p.dim != 3) fail(ErrorKind::Configuration, "sweep needs a 3-D set (generator cantor3, or dim 3)");
  const Curve curve = curve_by_name(cfg.curve);
  const SweepResult sweep = exceptional_sweep(p, curve, cfg.s, cfg.theta_grid, cfg.margin, threads);
  const double alpha = cfg.alpha > 0.0 ? cfg.alpha : p.nominal_dim;
  const double bound = exceptional_bound(cfg.s, alpha);

  RunResult r;
  std::string csv = "theta,est_dim,r2,below_s\n";
  std::vector<double> dims, thetas;
  for (const auto& row : sweep.rows) {
    csv += fmt::format("{},{},{},{}\n", row.theta, row.est_dim, row.r2, row.below_s ? 1 : 0);
    dims.push_back(row.est_dim);
    thetas.push_back(row.theta);
  }
  r.files["sweep.csv"] = csv;
  r.summary = {{"points", p.size()},
               {"s", cfg.s},
               {"alpha", alpha},
               {"exceptional_bound", bound},
               {"exceptional_fraction", sweep.summary.exceptional_fraction},
               {"median_est_dim", median(dims)},
               {"p10_est_dim", quantile_low(dims, 0.1)},
               {"min_est_dim", *std::min_element(dims.begin(), dims.end())}};
  if (sweep.summary.exceptional_dim_fit) r.summary["exceptional_dim_fit"] = fit_json(*sweep.summary.exceptional_dim_fit);

  Plot plot;
  plot.title = fmt::format("box dimension of projections, {} directions", cfg.theta_grid);
  plot.x_label = "theta";
  plot.y_label = "estimated dimension";
  plot.series.push_back({"est_dim", thetas, dims, false});
  plot.has_reference = true;
  plot.reference = cfg.s - cfg.margin;
  plot.reference_label = fmt::format("s - margin = {}", cfg.s - cfg.margin);
  r.files["sweep.svg"] = render_svg(plot);
  return r;
}

RunResult run_incidence_cmd(const RunConfig& cfg, unsigned threads) {
  const Curve curve = curve_by_name(cfg.curve);
  RunResult r;
  std::string csv = "delta,s,t,seed,theta_count,candidate_balls,heavy_count,lhs,rhs,fitted_C,violation,double_counting\n";
  std::map<std::uint64_t, std::vector<double>> per_seed;
  double max_c = 0.0;
  bool violation = false, counting = true;
  Plot plot;
  plot.title = fmt::format("incidence bound, s = {}, t = {}", cfg.s, cfg.t);
  plot.x_label = "delta";
  plot.y_label = "fitted C";
  plot.log2_x = true;
  plot.log2_y = true;
  for (int k = 0; k < cfg.seeds; ++k) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
    PlotSeries series;
    series.label = cfg.seeds <= 6 ? fmt::format("seed {}", seed) : "";
    for (const double delta : cfg.deltas) {
      const int level = level_of(delta);
      IncidenceConfig ic = cfg.generator == "origin" ? origin_config(curve, level, cfg.s)
                                                     : random_config(curve, level, cfg.s, cfg.t, seed);
      if (cfg.mode == "rescaled") ic = rescale_config(ic);
      const IncidenceRun run = run_incidence(ic, cfg.epsilon, kDefaultFittedCeiling, threads);
      const auto& rep = run.report;
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", delta, cfg.s, cfg.t, seed, rep.theta_count,
                         run.candidate_balls, rep.heavy_count, rep.lhs, rep.rhs, rep.fitted_C, rep.violation ? 1 : 0,
                         run.double_counting ? 1 : 0);
      per_seed[seed].push_back(rep.fitted_C);
      max_c = std::max(max_c, rep.fitted_C);
      violation = violation || rep.violation;
      counting = counting && run.double_counting;
      series.xs.push_back(delta);
      series.ys.push_back(rep.fitted_C);
    }
    plot.series.push_back(std::move(series));
  }
  double worst_spread = 0.0;
  for (const auto& [seed, values] : per_seed) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo > 0.0) worst_spread = std::max(worst_spread, *hi / *lo);
  }
  r.files["incidence.csv"] = csv;
  r.summary = {{"runs", cfg.seeds * static_cast<int>(cfg.deltas.size())},
               {"max_fitted_C", max_c},
               {"ceiling", kDefaultFittedCeiling},
               {"any_violation", violation},
               {"double_counting_all", counting},
               {"max_scale_spread", worst_spread}};
  r.files["incidence.svg"] = render_svg(plot);
  return r;
}

RunResult run_decouple(const RunConfig& cfg, unsigned threads) {
  const Curve curve = curve_by_name(cfg.curve);
  RunResult r;
  std::string csv = "delta,t,seed,lhs,rhs,ratio\n";
  std::vector<double> xs, ys, max_x, max_y;
  double worst = 0.0;
  for (const double delta : cfg.deltas) {
    const ConeGeometry g = build_geometry(curve, delta, 0.5, threads);
    std::vector<DecouplingReport> reports(static_cast<std::size_t>(cfg.seeds));
    parallel_for(reports.size(), threads, [&](std::size_t k) {
      const std::uint64_t seed = cfg.seed + k;
      const CapSelection sel = tspacing_subsample(g, cfg.t, seed);
      const GridFunction f = random_cap_function(g, sel.caps, Rng(seed, static_cast<std::uint64_t>(g.level)).next());
      reports[k] = decoupling_ratio(f, sel.caps, cfg.t, delta, g);
    });
    double top = 0.0;
    for (std::size_t k = 0; k < reports.size(); ++k) {
      const auto& rep = reports[k];
      csv += fmt::format("{},{},{},{},{},{}\n", delta, cfg.t, cfg.seed + k, rep.lhs, rep.rhs, rep.ratio);
      xs.push_back(std::log2(1.0 / delta));
      ys.push_back(std::log2(rep.ratio));
      top = std::max(top, rep.ratio);
    }
    max_x.push_back(delta);
    max_y.push_back(top);
    worst = std::max(worst, top);
  }
  r.files["decouple.csv"] = csv;
  r.summary = {{"rows", xs.size()},
               {"max_ratio", worst},
               {"max_ratio_per_delta", max_y},
               {"fitted_exponent", cfg.deltas.size() >= 2 ? slope(xs, ys) : 0.0}};
  Plot plot;
  plot.title = fmt::format("decoupling ratio, t = {}", cfg.t);
  plot.x_label = "delta";
  plot.y_label = "ratio";
  plot.log2_x = true;
  plot.log2_y = true;
  PlotSeries all{"runs", {}, {}, true};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    all.xs.push_back(std::exp2(-xs[i]));
    all.ys.push_back(std::exp2(ys[i]));
  }
  plot.series.push_back(std::move(all));
  plot.series.push_back({"max over seeds", max_x, max_y, false});
  r.files["decouple.svg"] = render_svg(plot);
  return r;
}

}  // namespace

RunConfig resolve_config(const std::string& command, const json& file, const std::vector<std::string>& overrides) {
  RunConfig cfg = defaults(command);
  if (!file.is_null()) {
    if (!file.is_object()) fail(ErrorKind::Configuration, "config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) apply(cfg, key, value);
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::Configuration, fmt::format("bad --set '{}'", item));
    apply(cfg, item.substr(0, eq), parse_override_value(item.substr(eq + 1)));
  }
  check(cfg);
  return cfg;
}

RunResult execute(const RunConfig& cfg, unsigned threads) {
  RunResult r;
  if (cfg.command == "gen") r = run_gen(cfg);
  else if (cfg.command == "cover") r = run_cover(cfg);
  else if (cfg.command == "sweep") r = run_sweep(cfg, threads);
  else if (cfg.command == "incidence") r = run_incidence_cmd(cfg, threads);
  else if (cfg.command == "decouple") r = run_decouple(cfg, threads);
  else fail(ErrorKind::Configuration, fmt::format("unknown command '{}'", cfg.command));
  r.summary = {{"command", cfg.command}, {"config", to_json(cfg)}, {"results", std::move(r.summary)}};
  r.files["summary.json"] = dump(r.summary);
  return r;
}

RunResult run(const RunConfig& cfg, unsigned threads) {
  RunResult r = execute(cfg, threads);
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) fail(ErrorKind::Configuration, fmt::format("cannot create output directory {}: {}", cfg.out.string(), ec.message()));
  for (const auto& [name, contents] : r.files) {
    std::ofstream file(cfg.out / name, std::ios::binary);
    file << contents;
    if (!file) fail(ErrorKind::Configuration, fmt::format("cannot write {}", (cfg.out / name).string()));
  }
  return r;
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Configuration:
    case ErrorKind::Domain:
    case ErrorKind::Range:
    case ErrorKind::Geometry:
      return 2;
    case ErrorKind::Infeasible:
    case ErrorKind::Capacity:
      return 3;
    default:
      return 1;
  }
}

namespace {

void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
  err << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Restricted projection laboratory: coverings, projection sweeps, incidence and decoupling runs"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  for (const auto& name : commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", overrides, "key=value override (repeatable)")->take_all();
    sub->add_option("--out", out_dir, "output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "configuration", e.what());
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json file;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) fail(ErrorKind::Configuration, fmt::format("cannot read config {}", config_path));
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        fail(ErrorKind::Configuration, fmt::format("config {} is not valid JSON: {}", config_path, e.what()));
      }
    }
    if (!out_dir.empty()) overrides.push_back("out=" + json(out_dir).dump());
    const RunConfig cfg = resolve_config(command, file, overrides);
    const RunResult r = run(cfg, threads_from_env());
    for (const auto& [name, contents] : r.files) out << (cfg.out / name).generic_string() << "\n";
    return 0;
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace projlab
