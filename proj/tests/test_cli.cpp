#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "bvld/cli.hpp"
#include "doctest.h"

using namespace bvld;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() : dir(fs::temp_directory_path() /
                  ("bvld_cli_test_" + std::to_string(::getpid()))) {
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = dir / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string prefix(const std::string& stem) const {
    return (dir / stem).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("command names round-trip and strangers are refused") {
  for (const auto c : {Command::Solve, Command::Dynamics, Command::Sweep,
                       Command::Flow, Command::Dro, Command::Pareto,
                       Command::Verify})
    CHECK(parse_command(command_name(c)) == c);
  CHECK(field_of([] { parse_command("solv"); }) == "command");
}

TEST_CASE("an empty config resolves to the documented defaults") {
  const RunConfig cfg = parse_config("{}", Command::Solve);
  CHECK(cfg.seed == 1);
  CHECK(cfg.family == "quadratic");
  CHECK(cfg.dim == 4);
  CHECK(cfg.potential_kind == "euclidean");
  CHECK(cfg.solver_choice == "exact");
  CHECK(cfg.env_values.size() == 8);
  CHECK(cfg.env_values.front() == 0.0);
  CHECK(cfg.env_values.back() == doctest::Approx(1.2));
  CHECK(cfg.rho_grid.size() == 8);
}

TEST_CASE("config errors name the offending dotted field") {
  CHECK(field_of([] {
          parse_config(R"({"potential": {"mu": -1.0}})", Command::Solve);
        }) == "potential.mu");
  CHECK(field_of([] {
          parse_config(R"({"potential": {"mu": "big"}})", Command::Solve);
        }) == "potential.mu");
  CHECK(field_of([] {
          parse_config(R"({"problem": {"dim": 0}})", Command::Solve);
        }) == "problem.dim");
  CHECK(field_of([] {
          parse_config(R"({"schedule": {"kind": "brownian"}})", Command::Dynamics);
        }) == "schedule.kind");
  // entropy over an unconstrained domain cannot normalize
  CHECK(field_of([] {
          parse_config(R"({"potential": {"kind": "entropy"}})", Command::Solve);
        }) == "feasible.kind");
  // sweep is pinned to the unit euclidean geometry
  CHECK(field_of([] {
          parse_config(R"({"potential": {"kind": "entropy"},
                           "feasible": {"kind": "simplex"}})",
                       Command::Sweep);
        }) == "potential.kind");
}

TEST_CASE("unknown keys are rejected, not ignored") {
  CHECK(field_of([] {
          parse_config(R"({"problem": {"dims": 4}})", Command::Solve);
        }) == "problem.dims");
  CHECK(field_of([] { parse_config(R"({"sedd": 3})", Command::Solve); }) ==
        "sedd");
}

TEST_CASE("json syntax problems are parse errors, not config errors") {
  CHECK_THROWS_AS(parse_config("{", Command::Solve), ParseError);
  CHECK_THROWS_AS(parse_config("[1,2]", Command::Solve), ConfigError);
}

TEST_CASE("canonical serialization spells out every default and hashes stably") {
  const RunConfig a = parse_config("{}", Command::Solve);
  const RunConfig b = parse_config(R"({"seed": 1})", Command::Solve);
  CHECK(canonical_config(a) == canonical_config(b));
  CHECK(fnv1a_hash(canonical_config(a)) == fnv1a_hash(canonical_config(b)));

  const RunConfig c = parse_config(R"({"seed": 2})", Command::Solve);
  CHECK(fnv1a_hash(canonical_config(c)) != fnv1a_hash(canonical_config(a)));

  // canonical text mentions resolved defaults, not just overrides
  CHECK(canonical_config(a).find("eig_hi") != std::string::npos);
}

TEST_CASE("series ingestion centers, scales and flags degenerate columns") {
  const TempDir tmp;
  const std::string path =
      tmp.file("series.csv", "t,load\n0,0.0\n1,1.0\n");

  const IngestResult plain = ingest_series(path, "load", false);
  REQUIRE(plain.values.size() == 2);
  CHECK(plain.values[0] == doctest::Approx(-0.5));
  CHECK(plain.values[1] == doctest::Approx(0.5));
  CHECK(plain.sigma == doctest::Approx(0.5));
  CHECK_FALSE(plain.constant);

  const IngestResult unit = ingest_series(path, "load", true);
  CHECK(unit.values[0] == doctest::Approx(-1.0));
  CHECK(unit.values[1] == doctest::Approx(1.0));

  const std::string flat = tmp.file("flat.csv", "x\n3.5\n3.5\n3.5\n");
  const IngestResult c = ingest_series(flat, "x", false);
  CHECK(c.constant);
  REQUIRE_FALSE(c.warnings.empty());
  CHECK(c.values == std::vector<double>(3, 0.0));
}

TEST_CASE("series ingestion errors carry row and column context") {
  const TempDir tmp;
  const std::string path = tmp.file("s.csv", "t,load\n0,1.0\n1,2.0\n");
  try {
    ingest_series(path, "volume", false);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("volume") != std::string::npos);
    CHECK(msg.find("t, load") != std::string::npos);  // available headers
  }

  const std::string bad = tmp.file("bad.csv", "x\n1.0\ntwo\n");
  try {
    ingest_series(bad, "x", false);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }

  const std::string ragged = tmp.file("ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(ingest_series(ragged, "a", false), ParseError);

  const std::string empty = tmp.file("empty.csv", "x\n1.0\n");
  CHECK_THROWS_AS(ingest_series(empty, "x", false), EmptySeries);
}

TEST_CASE("sweep outputs are byte-identical across reruns") {
  const TempDir tmp;
  RunConfig cfg = parse_config(
      R"({"seed": 9,
          "sweep": {"env_values": [0.0, 0.6], "obs_values": [0.0, 0.6],
                    "reps": 2, "horizon": 15}})",
      Command::Sweep);
  cfg.out_prefix = tmp.prefix("m");

  REQUIRE(run_command(cfg, /*quiet=*/true) == 0);
  const std::string first = slurp(tmp.prefix("m") + "_map.json");
  REQUIRE(run_command(cfg, /*quiet=*/true) == 0);
  const std::string second = slurp(tmp.prefix("m") + "_map.json");
  CHECK(first == second);
  CHECK(first.find("\"cells\"") != std::string::npos);
  CHECK(first.find("config_hash") != std::string::npos);
}

TEST_CASE("solve runs end to end and echoes resolved metadata") {
  const TempDir tmp;
  RunConfig cfg = parse_config(
      R"({"seed": 4, "problem": {"family": "quadratic", "dim": 3}})",
      Command::Solve);
  cfg.out_prefix = tmp.prefix("s");
  REQUIRE(run_command(cfg, true) == 0);
  const std::string out = slurp(tmp.prefix("s") + "_solution.json");
  CHECK(out.find("\"kkt_residual\"") != std::string::npos);
  CHECK(out.find("\"seed\": 4") != std::string::npos);
}

TEST_CASE("external schedules surface file problems as exit code 2") {
  const TempDir tmp;
  RunConfig cfg = parse_config(
      R"({"schedule": {"kind": "external",
                       "series": {"path": "/nonexistent/series.csv",
                                  "column": "x"}}})",
      Command::Dynamics);
  cfg.out_prefix = tmp.prefix("d");
  CHECK(run_with_diagnostics(cfg, true) == 2);
}

TEST_CASE("a constant external series degrades to static with a warning") {
  const TempDir tmp;
  const std::string path =
      tmp.file("flat.csv", "demand\n2.0\n2.0\n2.0\n2.0\n2.0\n2.0\n2.0\n2.0\n");
  RunConfig cfg = parse_config(
      std::string(R"({"problem": {"dim": 2},
          "schedule": {"kind": "external",
                       "series": {"path": ")") + path +
          R"(", "column": "demand"}}})",
      Command::Dynamics);
  cfg.out_prefix = tmp.prefix("x");
  REQUIRE(run_with_diagnostics(cfg, true) == 0);
  const std::string meta = slurp(tmp.prefix("x") + "_trace_meta.json");
  CHECK(meta.find("zero variance") != std::string::npos);
  // every equilibrium equals the initial one: the trace csv repeats pstar0
  const std::string csv = slurp(tmp.prefix("x") + "_trace.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "t,p0,p1,pstar0,pstar1,D,W,kkt,regret");
}

TEST_CASE("verify writes a structured report") {
  const TempDir tmp;
  RunConfig cfg = parse_config(R"({"seed": 3})", Command::Verify);
  cfg.out_prefix = tmp.prefix("v");
  REQUIRE(run_command(cfg, true) == 0);
  const std::string rep = slurp(tmp.prefix("v") + "_report.json");
  CHECK(rep.find("\"rows\"") != std::string::npos);
  CHECK(rep.find("\"all_pass\": true") != std::string::npos);
  CHECK(rep.find("operator.contraction") != std::string::npos);
}
