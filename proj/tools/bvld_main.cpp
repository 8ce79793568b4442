#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "bvld/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"bregman-variational learning dynamics harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_prefix;
  std::uint64_t seed = 0;
  bool quiet = false;

  auto* copt = app.add_option("--config", config_path, "JSON run configuration");
  auto* sopt = app.add_option("--seed", seed, "seed override");
  auto* oopt = app.add_option("--out", out_prefix, "output path prefix");
  app.add_flag("--quiet", quiet, "suppress progress output");

  app.add_subcommand("solve", "apply the operator once")->fallthrough();
  app.add_subcommand("dynamics", "iterate under an environment schedule")->fallthrough();
  app.add_subcommand("sweep", "map stability over noise levels")->fallthrough();
  app.add_subcommand("flow", "integrate the continuous-time limit")->fallthrough();
  app.add_subcommand("dro", "robust envelope over an ambiguity set")->fallthrough();
  app.add_subcommand("pareto", "trace a two-objective frontier")->fallthrough();
  app.add_subcommand("verify", "run the internal consistency checks")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  bvld::RunConfig cfg;
  try {
    const bvld::Command cmd =
        bvld::parse_command(app.get_subcommands().front()->get_name());
    std::string text = "{}";
    if (copt->count() > 0) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "error: cannot read config file: " << config_path << "\n";
        return 2;
      }
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    cfg = bvld::parse_config(text, cmd);
  } catch (const bvld::ConfigError& e) {
    std::cerr << "error: invalid configuration at '" << e.field
              << "': " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (sopt->count() > 0) cfg.seed = seed;
  if (oopt->count() > 0) cfg.out_prefix = out_prefix;
  return bvld::run_with_diagnostics(cfg, quiet);
}
