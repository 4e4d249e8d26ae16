#include "projlab/covering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "projlab/dyadic.hpp"
#include "projlab/error.hpp"

namespace projlab {

double DyadicCube::side() const { return dyadic(level); }

std::size_t Covering::cube_count() const {
  std::size_t total = 0;
  for (const auto& level : cubes) total += level.size();
  return total;
}

std::vector<DyadicCube> Covering::all_cubes() const {
  std::vector<DyadicCube> out;
  for (std::size_t k = 0; k < cubes.size(); ++k) {
    for (const auto& index : cubes[k]) out.push_back({static_cast<int>(k), index, dim});
  }
  return out;
}

Cell cube_of(const PointSet& p, std::size_t i, int k) {
  const std::int64_t edge = std::int64_t{1} << p.level;
  Cell out{0, 0, 0};
  for (int a = 0; a < p.dim; ++a) {
    std::int64_t idx = p.cells[i][static_cast<std::size_t>(a)];
    if (idx < -edge || idx > edge) fail(ErrorKind::Domain, "cell outside [-1, 1]^d cannot be covered");
    if (idx == edge) idx = edge - 1;
    out[static_cast<std::size_t>(a)] = k <= p.level ? ancestor(idx, p.level - k) : idx * (std::int64_t{1} << (k - p.level));
  }
  return out;
}

namespace {

Cell ancestor_cell(const Cell& c, int shift) {
  return {ancestor(c[0], shift), ancestor(c[1], shift), ancestor(c[2], shift)};
}

// (coarse level l, level-l ancestor, fine level k) for every cube of the
// cover and every l in [from, k).
struct Tally {
  int l;
  Cell anc;
  int k;
  auto operator<=>(const Tally&) const = default;
};

std::vector<std::pair<Tally, std::size_t>> tally(const std::vector<std::vector<Cell>>& cubes, int from) {
  std::vector<Tally> entries;
  for (int k = 0; k < static_cast<int>(cubes.size()); ++k) {
    for (const auto& c : cubes[static_cast<std::size_t>(k)]) {
      for (int l = std::max(from, 0); l < k; ++l) entries.push_back({l, ancestor_cell(c, k - l), k});
    }
  }
  std::sort(entries.begin(), entries.end());
  std::vector<std::pair<Tally, std::size_t>> runs;
  for (const auto& e : entries) {
    if (!runs.empty() && runs.back().first == e) {
      ++runs.back().second;
    } else {
      runs.push_back({e, 1});
    }
  }
  return runs;
}

bool violates(std::size_t count, int levels, double s) {
  return static_cast<double>(count) > std::exp2(levels * s) * (1.0 + kSlack);
}

}  // namespace

Covering greedy_cover(const PointSet& x, double s, double epsilon, int min_level) {
  const int k_max = x.level;
  if (min_level < 0 || min_level >= k_max) {
    fail(ErrorKind::Range, fmt::format("degenerate level range: min_level {} >= k_max {}", min_level, k_max));
  }
  if (!(s >= 0.0 && s <= x.dim)) fail(ErrorKind::Domain, "covering exponent must lie in [0, ambient_dim]");
  if (!(epsilon > 0.0)) fail(ErrorKind::Domain, "covering budget must be positive");

  Covering c;
  c.dim = x.dim;
  c.s = s;
  c.epsilon = epsilon;
  c.min_level = min_level;
  c.k_max = k_max;
  c.cubes.assign(static_cast<std::size_t>(k_max) + 1, {});
  c.target = std::make_shared<const PointSet>(x);
  auto& finest = c.cubes[static_cast<std::size_t>(k_max)];
  for (std::size_t i = 0; i < x.size(); ++i) finest.push_back(cube_of(x, i, k_max));
  std::sort(finest.begin(), finest.end());
  finest.erase(std::unique(finest.begin(), finest.end()), finest.end());

  // Each merge strictly lowers the cube count, so this terminates.
  for (;;) {
    const auto runs = tally(c.cubes, min_level + 1);
    int coarsest = k_max + 1;
    for (const auto& [key, count] : runs) {
      if (key.l < coarsest && violates(count, key.k - key.l, s)) coarsest = key.l;
    }
    if (coarsest > k_max) break;
    std::set<Cell> merged;
    for (const auto& [key, count] : runs) {
      if (key.l == coarsest && violates(count, key.k - key.l, s)) merged.insert(key.anc);
    }
    for (int k = coarsest + 1; k <= k_max; ++k) {
      auto& level = c.cubes[static_cast<std::size_t>(k)];
      std::erase_if(level, [&](const Cell& cube) { return merged.count(ancestor_cell(cube, k - coarsest)) > 0; });
    }
    auto& target_level = c.cubes[static_cast<std::size_t>(coarsest)];
    target_level.insert(target_level.end(), merged.begin(), merged.end());
    std::sort(target_level.begin(), target_level.end());
  }

  const auto report = validate_covering(c);
  if (!report.cover_ok || !report.disjoint) fail(ErrorKind::Inconsistency, "greedy cover lost a cell or overlaps");
  if (report.worst_condition3_ratio > 1.0 + kSlack) {
    fail(ErrorKind::Infeasible,
         fmt::format("s-dimensional condition fails at coarse level {} (ratio {}); the set is too large for s = {}",
                     report.witness.coarse_level, report.worst_condition3_ratio, s));
  }
  if (!report.budget_ok) {
    fail(ErrorKind::Infeasible,
         fmt::format("covering budget {} exceeds epsilon = {}; dim >= s at this resolution", report.budget_value, epsilon));
  }
  return c;
}

bool CoveringReport::valid() const noexcept {
  return cover_ok && disjoint && budget_ok && worst_condition3_ratio <= 1.0 + kSlack;
}

CoveringReport validate_covering(const Covering& c, const PointSet* target) {
  CoveringReport report;
  const PointSet* x = target != nullptr ? target : c.target.get();
  const int top = static_cast<int>(c.cubes.size()) - 1;

  std::vector<std::set<Cell>> present(c.cubes.size());
  for (std::size_t k = 0; k < c.cubes.size(); ++k) present[k].insert(c.cubes[k].begin(), c.cubes[k].end());

  report.cover_ok = true;
  if (x != nullptr) {
    for (std::size_t i = 0; i < x->size() && report.cover_ok; ++i) {
      bool found = false;
      for (int k = 0; k <= top && !found; ++k) found = present[static_cast<std::size_t>(k)].count(cube_of(*x, i, k)) > 0;
      if (!found) {
        report.cover_ok = false;
        report.uncovered = x->point(i);
      }
    }
  }

  report.disjoint = true;
  for (int k = 0; k <= top && report.disjoint; ++k) {
    const auto& level = c.cubes[static_cast<std::size_t>(k)];
    if (present[static_cast<std::size_t>(k)].size() != level.size()) report.disjoint = false;
    for (const auto& cube : level) {
      for (int l = 0; l < k && report.disjoint; ++l) {
        if (present[static_cast<std::size_t>(l)].count(ancestor_cell(cube, k - l)) > 0) report.disjoint = false;
      }
    }
  }

  for (int k = 0; k <= top; ++k) {
    report.budget_value += static_cast<double>(c.cubes[static_cast<std::size_t>(k)].size()) * std::exp2(-k * c.s);
  }
  report.budget_ok = report.budget_value <= c.epsilon * (1.0 + kSlack);

  for (const auto& [key, count] : tally(c.cubes, 0)) {
    const double ratio = static_cast<double>(count) / std::exp2((key.k - key.l) * c.s);
    if (ratio > report.worst_condition3_ratio) {
      report.worst_condition3_ratio = ratio;
      report.witness = {key.l, key.anc, key.k, count};
    }
  }
  return report;
}

double dyadic_content(const PointSet& x, double t, int max_level) {
  if (max_level < 0) fail(ErrorKind::Range, "max_level must be nonnegative");
  std::vector<std::pair<Cell, double>> nodes;
  for (std::size_t i = 0; i < x.size(); ++i) nodes.push_back({cube_of(x, i, max_level), 0.0});
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
              nodes.end());
  const double leaf = std::exp2(-max_level * t);
  for (auto& node : nodes) node.second = leaf;
  for (int l = max_level - 1; l >= 0; --l) {
    for (auto& node : nodes) node.first = ancestor_cell(node.first, 1);
    std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<Cell, double>> parents;
    for (const auto& node : nodes) {
      if (!parents.empty() && parents.back().first == node.first) {
        parents.back().second += node.second;
      } else {
        parents.push_back(node);
      }
    }
    const double own = std::exp2(-l * t);
    for (auto& p : parents) p.second = std::min(own, p.second);
    nodes = std::move(parents);
  }
  double total = 0.0;
  for (const auto& node : nodes) total += node.second;
  return total;
}

nlohmann::json covering_to_json(const Covering& c) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t k = 0; k < c.cubes.size(); ++k) {
    if (c.cubes[k].empty()) continue;
    nlohmann::json cubes = nlohmann::json::array();
    for (const auto& cube : c.cubes[k]) {
      nlohmann::json idx = nlohmann::json::array();
      for (int a = 0; a < c.dim; ++a) idx.push_back(cube[static_cast<std::size_t>(a)]);
      cubes.push_back(std::move(idx));
    }
    levels.push_back({{"k", k}, {"cubes", std::move(cubes)}});
  }
  return {{"s", c.s},
          {"epsilon", c.epsilon},
          {"dim", c.dim},
          {"min_level", c.min_level},
          {"k_max", c.k_max},
          {"levels", std::move(levels)}};
}

Covering covering_from_json(const nlohmann::json& j) {
  Covering c;
  try {
    c.s = j.at("s").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.dim = j.value("dim", 1);
    c.min_level = j.value("min_level", 0);
    int top = 0;
    for (const auto& level : j.at("levels")) top = std::max(top, level.at("k").get<int>());
    c.k_max = j.value("k_max", top);
    c.cubes.assign(static_cast<std::size_t>(std::max(top, c.k_max)) + 1, {});
    for (const auto& level : j.at("levels")) {
      auto& dest = c.cubes[level.at("k").get<std::size_t>()];
      for (const auto& cube : level.at("cubes")) {
        Cell idx{0, 0, 0};
        if (cube.size() != static_cast<std::size_t>(c.dim)) fail(ErrorKind::Configuration, "cube index has wrong arity");
        for (int a = 0; a < c.dim; ++a) idx[static_cast<std::size_t>(a)] = cube.at(static_cast<std::size_t>(a)).get<std::int64_t>();
        dest.push_back(idx);
      }
      std::sort(dest.begin(), dest.end());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, std::string("malformed covering JSON: ") + e.what());
  }
  return c;
}

}  // namespace projlab
