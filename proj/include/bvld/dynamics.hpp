#pragma once

// Time-varying runs of the proximal operator: drift schedules, iterate
// traces, tracking-bound checks, the continuous-time mirror flow and the
// noise-stability sweep.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bvld/solver.hpp"

namespace bvld {

// Sequence of quadratic losses f_t(q) = 1/2 q'Aq - b_t'q with a fixed A and
// a moving target b_t, so the instantaneous equilibrium A^-1 b_t is exact.
struct DriftSchedule {
  enum class Kind { Static, RandomWalk, Sinusoidal, Piecewise, ExternalSeries };

  Kind kind = Kind::Static;
  int horizon = 0;          // steps t = 1..horizon
  std::uint64_t seed = 0;
  double sigma_env = 0.0;   // environment drift scale
  double sigma_obs = 0.0;   // additive gradient-noise scale at solve time
  double amplitude = 0.0;   // sinusoidal
  int period = 0;           // sinusoidal
  std::vector<int> jump_times;  // piecewise
  double jump_scale = 0.0;      // piecewise displacement scale
  Mat a;
  Vec b0;
  std::vector<Vec> external;  // explicit b_t sequence (t = 0..horizon)

  static DriftSchedule static_schedule(Mat a, Vec b0, int horizon,
                                       std::uint64_t seed,
                                       double sigma_obs = 0.0);
  static DriftSchedule random_walk(Mat a, Vec b0, int horizon,
                                   std::uint64_t seed, double sigma_env,
                                   double sigma_obs = 0.0);
  static DriftSchedule sinusoidal(Mat a, Vec b0, int horizon,
                                  std::uint64_t seed, double amplitude,
                                  int period, double sigma_obs = 0.0);
  static DriftSchedule piecewise(Mat a, Vec b0, int horizon,
                                 std::uint64_t seed, std::vector<int> jumps,
                                 double jump_scale, double sigma_obs = 0.0);
  static DriftSchedule external_series(Mat a, std::vector<Vec> targets,
                                       std::uint64_t seed,
                                       double sigma_obs = 0.0);

  // Deterministic target sequence b_0..b_horizon for this seed.
  std::vector<Vec> build_targets() const;
};

enum class SolverChoice { Exact, Inexact, QuasiNewton };

struct TraceRow {
  int t = 0;
  Vec p;            // iterate after the step at time t
  Vec pstar;        // instantaneous equilibrium A^-1 b_t
  double gap = 0.0;      // D_psi(p_t || p*_t)
  double drift = 0.0;    // D_psi(p*_{t-1} || p*_t)
  double kkt = 0.0;      // subproblem residual reported by the solver
  double regret = 0.0;   // f_t(p_t) - f_t(p*_t), noiseless objective
  SolveStatus status = SolveStatus::Converged;
};

struct IterateTrace {
  std::vector<TraceRow> rows;  // rows[0] is the initial state
  double kappa = 0.0;
  std::uint64_t seed = 0;
  double sigma_env = 0.0;
  double sigma_obs = 0.0;
  double cumulative_drift = 0.0;  // sum of drift column (V_T)
  double total_gap = 0.0;         // sum of gap column over t >= 1
  double regret_sum = 0.0;        // sum of regret over t >= 1
  int fejer_violations = 0;       // steps with gap_t > (1-kappa) gap_{t-1} + tol
  bool fejer_checked = false;

  double normalized_regret() const;       // regret_sum / horizon
  std::vector<double> gap_series() const; // D column including row 0
  // CSV with header t,p0..,pstar0..,D,W,kkt,regret and %.17g formatting.
  void write_csv(std::ostream& os) const;
};

struct DynamicsOptions {
  SolveOptions solve;
  // Check the per-step Fejer inequality on static noise-free schedules; the
  // count of violations is recorded on the trace.
  bool check_fejer = true;
  double fejer_tol = 1e-9;
};

// Runs p_{t+1} = T_t(p_t) over the schedule. prob_template supplies the
// geometry and feasible set; its objective must be quadratic with the
// schedule's matrix. Gradient noise enters as a per-step linear tilt drawn
// from the seeded stream. Solver failures are rethrown with the step index.
IterateTrace run_dynamics(const DriftSchedule& sched,
                          const BvldProblem& prob_template, const Point& p0,
                          SolverChoice choice, const DynamicsOptions& opts = {});

struct DriftReport {
  double lhs = 0.0;     // sum_t gap_t
  double rhs = 0.0;     // (1/kappa) gap_0 + (C/kappa) V_T
  double ratio = 0.0;   // lhs / rhs
  bool pass = false;    // ratio <= 1 + 1e-6
  // Per-step forms: gap_t <= 2(1-kappa)(gap_{t-1} + drift_t) and the
  // normalized gap_t <= (1-kappa) gap_{t-1} + C drift_t.
  int per_step_violations = 0;
  int normalized_violations = 0;
  double worst_per_step_excess = 0.0;
};

// Tracking bound audit with constant C (canonically 2(1-kappa)).
DriftReport check_drift_bound(const IterateTrace& trace, double kappa,
                              double c);

struct FlowResult {
  std::vector<double> time;
  std::vector<double> energy;     // D_psi(p(t) || p*)
  double lambda_hat = 0.0;        // fitted exponential decay rate
  double xi_integral = 0.0;       // integral of max(0, dE/dt + kappa E)
  bool decay_envelope_ok = true;  // E(t) <= exp(-lambda_hat t) E(0) (1+1e-3)
  bool rate_consistent = true;    // lambda_hat >= 0.8 kappa
  Point p_end;
};

// Fixed-step RK4 integration of the mirror flow
//   dp/dt = -grad_inv_psi(grad f(p)),
// with dt capped at 1e-2 mu/L (StepSizeError beyond). If the trajectory
// leaves the domain the integration restarts once with dt/2, then fails
// with DomainError.
FlowResult integrate_evi_flow(const BvldProblem& prob, const Point& p0,
                              double t_end, double dt,
                              const SolveOptions& opts = {});

struct SweepSpec {
  std::vector<double> env_values;
  std::vector<double> obs_values;
  int reps = 5;
  int horizon = 120;
  std::uint64_t master_seed = 0;
  Mat a;
  Vec b0;
  Point p0;             // empty => start at the initial equilibrium
  SolverChoice choice = SolverChoice::Exact;
  SolveOptions solve;
};

struct SweepCell {
  double sigma_env = 0.0;
  double sigma_obs = 0.0;
  double mean_normalized_regret = 0.0;
  int classification = 0;  // 0 stable, 1 transition, 2 unstable
  bool solver_failed = false;
};

struct StabilityMap {
  std::vector<double> env_values;
  std::vector<double> obs_values;
  std::vector<SweepCell> cells;  // row-major, env outer, obs inner
  double c1 = 0.0, c2 = 0.0, r2 = 0.0;  // plane fit R/T ~ c1 env + c2 obs
  int reps = 0;
  int horizon = 0;
  std::uint64_t master_seed = 0;

  const SweepCell& at(size_t i_env, size_t i_obs) const;
};

inline constexpr double kStableThreshold = 0.05;
inline constexpr double kUnstableThreshold = 0.15;

// Mean normalized regret per (sigma_env, sigma_obs) cell over seeded
// repetitions, classified against the stability thresholds. Cells run
// concurrently with per-cell derived seeds; the merge is deterministic.
// Cells whose solver fails are marked unstable and flagged.
StabilityMap stability_sweep(const SweepSpec& spec);

}  // namespace bvld
