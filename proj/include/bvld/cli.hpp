#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bvld/checks.hpp"
#include "bvld/dynamics.hpp"
#include "bvld/extensions.hpp"

namespace bvld {

enum class Command { Solve, Dynamics, Sweep, Flow, Dro, Pareto, Verify };

// Maps a subcommand name to its enum; ConfigError("command") on unknown names.
Command parse_command(const std::string& name);
const char* command_name(Command c);

struct SeriesSpec {
  std::string path;
  std::string column;
  bool normalize = false;
};

// Fully resolved run description. Everything has a default so a config file
// only states what it changes; the resolved values are echoed into output
// metadata.
struct RunConfig {
  Command command = Command::Verify;
  std::uint64_t seed = 1;
  std::string out_prefix = "bvld";

  // problem
  std::string family = "quadratic";  // quadratic | linear | log_sum_exp | huberized
  int dim = 4;
  double eig_lo = 1.0;  // spectrum of a randomly drawn quadratic
  double eig_hi = 8.0;
  std::optional<Mat> matrix;       // explicit quadratic matrix
  std::optional<Vec> linear_term;  // quadratic b / linear cost vector
  double lse_scale = 0.5;
  double huber_delta = 0.7;
  std::optional<Vec> huber_center;

  // potential
  std::string potential_kind = "euclidean";  // euclidean | entropy
  double mu = 1.0;

  // feasible set
  std::string feasible_kind = "whole";  // whole | box | simplex
  std::optional<Vec> lower, upper;

  // solver
  std::string solver_choice = "exact";  // exact | inexact | qn
  SolveOptions solve;

  // schedule (dynamics)
  std::string schedule_kind = "static";  // static | random_walk | sinusoidal |
                                         // piecewise | external
  int horizon = 200;
  double sigma_env = 0.3;
  double sigma_obs = 0.0;
  double amplitude = 1.0;
  int period = 25;
  std::vector<int> jumps;
  double jump_scale = 1.0;
  std::optional<SeriesSpec> series;

  std::optional<Vec> p0;

  // flow
  double t_end = 3.0;
  double dt = 1e-3;

  // sweep
  std::vector<double> env_values;  // default: 8 values linearly spaced on [0, 1.2]
  std::vector<double> obs_values;
  int reps = 5;
  int sweep_horizon = 120;

  // dro
  std::string dro_divergence = "kl";  // kl | chi2
  double rho = 0.3;
  int dro_atoms = 5;
  std::optional<Vec> dro_weights;
  std::optional<Vec> dro_losses;
  std::vector<double> rho_grid;  // default: 8 radii from 0.01 to 2

  // pareto
  int pareto_points = 21;
};

// Strict-schema parse of a JSON config. Unknown or ill-typed keys raise
// ConfigError naming the dotted field; JSON syntax problems raise ParseError.
// The command comes from the command line, not the file, because it fixes
// which sections are meaningful.
RunConfig parse_config(const std::string& json_text, Command command);

// Canonical resolved-config serialization (fixed key order, every default
// spelled out) and the FNV-1a hash recorded with it in output metadata.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t fnv1a_hash(const std::string& text);

struct IngestResult {
  std::vector<double> values;  // centered, optionally unit-variance
  double sigma = 0.0;          // population std of the raw column
  bool constant = false;
  std::vector<std::string> warnings;
};

// Reads one numeric column of a headed CSV and returns the centered series
// used as a moving-target schedule. ParseError names the offending row or
// column (and lists available headers); EmptySeries on fewer than two rows.
IngestResult ingest_series(const std::string& path, const std::string& column,
                           bool normalize);

// Executes the configured command and writes its outputs under
// cfg.out_prefix. Returns the process exit code (0 success, 3 solver
// failure, 4 verification failure); invalid inputs surface as exceptions.
int run_command(const RunConfig& cfg, bool quiet);

// run_command wrapped with exception-to-exit-code mapping: 2 for
// validation/parse errors, 3 for solver failures, 4 for verification
// failures, 1 for anything unexpected. Diagnostics go to stderr.
int run_with_diagnostics(const RunConfig& cfg, bool quiet);

}  // namespace bvld
