#include <algorithm>
#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "projlab/cli.hpp"
#include "projlab/error.hpp"

using namespace projlab;
using nlohmann::json;

namespace {

std::size_t data_rows(const std::string& csv) {
  const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  return lines - 1;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "projlab");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("projlab_cli_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scales and overrides") {
  CHECK(parse_scale(json(0.25)) == 0.25);
  CHECK(parse_scale(json("2^-8")) == 0.00390625);
  CHECK(parse_scale(json("0.5")) == 0.5);
  CHECK_THROWS_AS(parse_scale(json("two")), Error);

  const auto cfg = resolve_config("decouple", json{{"seeds", 3}}, {"t=0.25", "deltas=[\"2^-4\", 0.03125]", "curve=helix"});
  CHECK(cfg.seeds == 3);
  CHECK(cfg.t == 0.25);
  CHECK(cfg.curve == "helix");
  CHECK(cfg.deltas == std::vector<double>{0.0625, 0.03125});

  const json echo = to_json(cfg);
  for (const char* key : {"command", "curve", "delta", "s", "t", "alpha", "theta_grid", "seed", "out"}) {
    CHECK(echo.contains(key));
  }
  CHECK(resolve_config("sweep", json{}, {}).s == 1.0);

  CHECK_THROWS_AS(resolve_config("sweep", json{{"colour", 1}}, {}), Error);
  CHECK_THROWS_AS(resolve_config("sweep", json{}, {"delta=0.3"}), Error);
  CHECK_THROWS_AS(resolve_config("sweep", json{}, {"theta_grid=\"many\""}), Error);
  CHECK_THROWS_AS(resolve_config("bake", json{}, {}), Error);
  CHECK_THROWS_AS(resolve_config("incidence", json{}, {"s=1"}), Error);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::Configuration) == 2);
  CHECK(exit_code(ErrorKind::Domain) == 2);
  CHECK(exit_code(ErrorKind::Infeasible) == 3);
  CHECK(exit_code(ErrorKind::Capacity) == 3);
  CHECK(exit_code(ErrorKind::Numeric) == 1);

  const auto dir = scratch("codes");
  const auto bad = invoke({"gen", "--set", "delta=0.3", "--out", dir.string()});
  CHECK(bad.code == 2);
  const json err = json::parse(bad.err);
  CHECK(err["error"]["kind"] == "domain");

  const auto unknown = invoke({"gen", "--set", "colour=red"});
  CHECK(unknown.code == 2);
  CHECK(json::parse(unknown.err)["error"]["kind"] == "configuration");

  CHECK(invoke({"frobnicate"}).code == 2);

  const auto infeasible = invoke({"cover", "--set", "s=0.3", "--out", dir.string()});
  CHECK(infeasible.code == 3);
  CHECK(json::parse(infeasible.err)["error"]["kind"] == "infeasible");

  const auto missing = invoke({"gen", "--config", (dir / "absent.json").string()});
  CHECK(missing.code == 2);
}

TEST_CASE("sweep writes one row per direction") {
  auto cfg = resolve_config("sweep", json{}, {"delta=\"2^-8\"", "theta_grid=256"});
  const auto r = execute(cfg, 2);
  CHECK(data_rows(r.files.at("sweep.csv")) == 256u);
  CHECK(r.files.at("sweep.csv").rfind("theta,est_dim,r2,below_s\n", 0) == 0);
  CHECK(r.summary["results"]["exceptional_bound"].get<double>() == doctest::Approx(0.5536).epsilon(1e-3));
  CHECK(r.files.count("sweep.svg") == 1);
  CHECK(r.files.at("sweep.svg").find("<polyline") != std::string::npos);
}

TEST_CASE("decouple covers the cartesian product of scales and seeds") {
  const auto cfg = resolve_config("decouple", json{{"deltas", {"2^-4", "2^-5", "2^-6"}}, {"seeds", 5}}, {});
  const auto r = execute(cfg, 1);
  CHECK(data_rows(r.files.at("decouple.csv")) == 15u);
  CHECK(r.files.at("decouple.csv").rfind("delta,t,seed,lhs,rhs,ratio\n", 0) == 0);
  CHECK(r.summary["config"]["seeds"] == 5);
}

TEST_CASE("runs are reproducible and written to disk") {
  const auto dir = scratch("repeat");
  const std::string out = (dir / "a").string();
  const auto first = invoke({"incidence", "--set", "seeds=2", "--out", out});
  REQUIRE(first.code == 0);
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(out)) {
    std::ifstream in(entry.path(), std::ios::binary);
    files[entry.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(files.size() == 3u);
  const auto cfg = resolve_config("incidence", json{}, {"seeds=2", "out=" + json(out).dump()});
  const auto again = execute(cfg, 4);
  CHECK(again.files == files);

  const json summary = json::parse(files.at("summary.json"));
  CHECK(summary["config"]["epsilon"] == 0.1);
  CHECK(summary["results"]["double_counting_all"] == true);
}

TEST_CASE("gen and cover outputs") {
  const auto gen = execute(resolve_config("gen", json{}, {"generator=grid", "dim=2", "delta=\"2^-6\""}), 1);
  CHECK(gen.summary["results"]["points"] == 4096);
  CHECK(gen.summary["results"]["box_dimension"]["slope"].get<double>() == doctest::Approx(2.0).epsilon(0.02));

  const auto cover = execute(resolve_config("cover", json{}, {}), 1);
  CHECK(cover.summary["results"]["valid"] == true);
  const json covering = json::parse(cover.files.at("covering.json"));
  CHECK(covering["s"] == 0.8);
}
