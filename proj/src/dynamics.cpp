#include "bvld/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <thread>

#include "bvld/random.hpp"

namespace bvld {
namespace {

constexpr std::uint64_t kObsStreamTag = 0x6f62736eULL;   // observation noise
constexpr std::uint64_t kEnvStreamTag = 0x656e7669ULL;   // environment drift
constexpr double kTwoPi = 6.28318530717958647692528676655900577;

void append_g17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void validate_base(const Mat& a, const Vec& b0, int horizon) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw ShapeError("DriftSchedule: A must be square and nonempty");
  if (b0.size() != a.rows())
    throw ShapeError("DriftSchedule: b0 does not match A");
  if (horizon <= 0) throw ShapeError("DriftSchedule: horizon must be positive");
}

}  // namespace

DriftSchedule DriftSchedule::static_schedule(Mat a, Vec b0, int horizon,
                                             std::uint64_t seed,
                                             double sigma_obs) {
  validate_base(a, b0, horizon);
  DriftSchedule s;
  s.kind = Kind::Static;
  s.horizon = horizon;
  s.seed = seed;
  s.sigma_obs = sigma_obs;
  s.a = std::move(a);
  s.b0 = std::move(b0);
  return s;
}

DriftSchedule DriftSchedule::random_walk(Mat a, Vec b0, int horizon,
                                         std::uint64_t seed, double sigma_env,
                                         double sigma_obs) {
  validate_base(a, b0, horizon);
  if (sigma_env < 0.0)
    throw ConfigError("schedule.sigma_env", "must be nonnegative");
  DriftSchedule s;
  s.kind = Kind::RandomWalk;
  s.horizon = horizon;
  s.seed = seed;
  s.sigma_env = sigma_env;
  s.sigma_obs = sigma_obs;
  s.a = std::move(a);
  s.b0 = std::move(b0);
  return s;
}

DriftSchedule DriftSchedule::sinusoidal(Mat a, Vec b0, int horizon,
                                        std::uint64_t seed, double amplitude,
                                        int period, double sigma_obs) {
  validate_base(a, b0, horizon);
  if (period <= 0) throw ConfigError("schedule.period", "must be positive");
  DriftSchedule s;
  s.kind = Kind::Sinusoidal;
  s.horizon = horizon;
  s.seed = seed;
  s.amplitude = amplitude;
  s.period = period;
  s.sigma_obs = sigma_obs;
  s.a = std::move(a);
  s.b0 = std::move(b0);
  return s;
}

DriftSchedule DriftSchedule::piecewise(Mat a, Vec b0, int horizon,
                                       std::uint64_t seed,
                                       std::vector<int> jumps,
                                       double jump_scale, double sigma_obs) {
  validate_base(a, b0, horizon);
  if (jump_scale < 0.0)
    throw ConfigError("schedule.jump_scale", "must be nonnegative");
  DriftSchedule s;
  s.kind = Kind::Piecewise;
  s.horizon = horizon;
  s.seed = seed;
  s.jump_times = std::move(jumps);
  s.jump_scale = jump_scale;
  s.sigma_obs = sigma_obs;
  s.a = std::move(a);
  s.b0 = std::move(b0);
  std::sort(s.jump_times.begin(), s.jump_times.end());
  return s;
}

DriftSchedule DriftSchedule::external_series(Mat a, std::vector<Vec> targets,
                                             std::uint64_t seed,
                                             double sigma_obs) {
  if (targets.size() < 2)
    throw EmptySeries("DriftSchedule::external_series: need at least 2 targets");
  validate_base(a, targets.front(), int(targets.size()) - 1);
  DriftSchedule s;
  s.kind = Kind::ExternalSeries;
  s.horizon = std::max<int>(1, int(targets.size()) - 1);
  s.seed = seed;
  s.sigma_obs = sigma_obs;
  s.a = std::move(a);
  s.b0 = targets.front();
  s.external = std::move(targets);
  return s;
}

std::vector<Vec> DriftSchedule::build_targets() const {
  std::vector<Vec> targets;
  targets.reserve(size_t(horizon) + 1);
  const int d = int(b0.size());
  GaussianSampler env(derive_seed(seed, kEnvStreamTag));
  switch (kind) {
    case Kind::Static: {
      for (int t = 0; t <= horizon; ++t) targets.push_back(b0);
      break;
    }
    case Kind::RandomWalk: {
      Vec b = b0;
      targets.push_back(b);
      for (int t = 1; t <= horizon; ++t) {
        b += sigma_env * env.vector(d);
        targets.push_back(b);
      }
      break;
    }
    case Kind::Sinusoidal: {
      Vec dir = Vec::Constant(d, 1.0 / std::sqrt(double(d)));
      for (int t = 0; t <= horizon; ++t)
        targets.push_back(
            b0 + amplitude * std::sin(kTwoPi * double(t) / period) * dir);
      break;
    }
    case Kind::Piecewise: {
      Vec b = b0;
      size_t j = 0;
      for (int t = 0; t <= horizon; ++t) {
        while (j < jump_times.size() && jump_times[j] == t) {
          b += jump_scale * env.vector(d);
          ++j;
        }
        targets.push_back(b);
      }
      break;
    }
    case Kind::ExternalSeries: {
      targets = external;
      while (int(targets.size()) <= horizon) targets.push_back(targets.back());
      break;
    }
  }
  return targets;
}

double IterateTrace::normalized_regret() const {
  const int t = int(rows.size()) - 1;
  return t > 0 ? regret_sum / double(t) : 0.0;
}

std::vector<double> IterateTrace::gap_series() const {
  std::vector<double> g;
  g.reserve(rows.size());
  for (const auto& r : rows) g.push_back(r.gap);
  return g;
}

void IterateTrace::write_csv(std::ostream& os) const {
  if (rows.empty()) return;
  const int d = int(rows.front().p.size());
  std::string out = "t";
  for (int i = 0; i < d; ++i) out += ",p" + std::to_string(i);
  for (int i = 0; i < d; ++i) out += ",pstar" + std::to_string(i);
  out += ",D,W,kkt,regret\n";
  for (const auto& r : rows) {
    out += std::to_string(r.t);
    for (int i = 0; i < d; ++i) {
      out += ',';
      append_g17(out, r.p[i]);
    }
    for (int i = 0; i < d; ++i) {
      out += ',';
      append_g17(out, r.pstar[i]);
    }
    out += ',';
    append_g17(out, r.gap);
    out += ',';
    append_g17(out, r.drift);
    out += ',';
    append_g17(out, r.kkt);
    out += ',';
    append_g17(out, r.regret);
    out += '\n';
  }
  os << out;
}

IterateTrace run_dynamics(const DriftSchedule& sched,
                          const BvldProblem& prob_template, const Point& p0,
                          SolverChoice choice, const DynamicsOptions& opts) {
  opts.solve.validate();
  if (prob_template.objective.kind() != Objective::Kind::Quadratic)
    throw ShapeError("run_dynamics: template objective must be quadratic");
  if (prob_template.objective.dim() != int(sched.b0.size()))
    throw ShapeError("run_dynamics: schedule does not match the template");
  prob_template.potential.require_domain(p0, "run_dynamics(p0)");
  if (!prob_template.feasible.contains(p0, 1e-9))
    throw DomainError("run_dynamics: p0 is infeasible");

  const std::vector<Vec> targets = sched.build_targets();
  const Objective base =
      Objective::quadratic(sched.a, sched.b0);  // validates spectrum once
  const int d = base.dim();
  const bool whole = prob_template.feasible.kind() == FeasibleSet::Kind::Whole;
  GaussianSampler obs(derive_seed(sched.seed, kObsStreamTag));

  IterateTrace trace;
  trace.seed = sched.seed;
  trace.sigma_env = sched.sigma_env;
  trace.sigma_obs = sched.sigma_obs;
  trace.fejer_checked = opts.check_fejer &&
                        sched.kind == DriftSchedule::Kind::Static &&
                        sched.sigma_obs == 0.0 && choice != SolverChoice::Inexact;

  // Instantaneous equilibrium: closed form on the whole space, otherwise the
  // fixed point of the step map, found by iterating it (contraction). The
  // last target is cached so Static schedules pay for one solve only.
  Vec cached_b(0), cached_pstar(0);
  auto equilibrium = [&](const Vec& b, const Vec& warm) -> Vec {
    if (cached_b.size() == b.size() && cached_b == b) return cached_pstar;
    Vec pstar;
    if (whole) {
      if (!base.quad_invertible())
        throw SpectrumError("run_dynamics: A must be nonsingular for p*");
      pstar = base.quad_solve(b);
    } else {
      const BvldProblem prob = BvldProblem::make(
          base.with_linear_term(b), prob_template.potential,
          prob_template.feasible);
      Vec x = warm;
      for (int k = 0; k < 400; ++k) {
        const SolveResult r = apply_qn(prob, x, opts.solve);
        const double move = (r.q - x).norm();
        x = r.q;
        if (move <= 1e-13 * std::max(1.0, x.norm())) break;
      }
      pstar = x;
    }
    cached_b = b;
    cached_pstar = pstar;
    return pstar;
  };

  TraceRow row0;
  row0.t = 0;
  row0.p = p0;
  row0.pstar = equilibrium(targets[0], p0);
  row0.gap = std::max(0.0, bregman_div(prob_template.potential, p0, row0.pstar));
  row0.drift = 0.0;
  {
    const Objective f0 = base.with_linear_term(targets[0]);
    const BvldProblem prob0 = BvldProblem::make(f0, prob_template.potential,
                                                prob_template.feasible);
    trace.kappa = prob0.kappa;
    row0.kkt = kkt_residual(prob0, p0, p0);
    row0.regret = f0.value(p0) - f0.value(row0.pstar);
  }
  trace.rows.push_back(row0);

  Point p = p0;
  Vec pstar_prev = row0.pstar;
  for (int t = 1; t <= sched.horizon; ++t) {
    Vec b_true = targets[size_t(t)];
    Vec b_solve = b_true;
    if (sched.sigma_obs > 0.0) {
      // Additive gradient noise = a linear tilt of the loss at solve time.
      b_solve -= sched.sigma_obs * obs.vector(d);
    }
    const Objective f_solve = base.with_linear_term(b_solve);
    const BvldProblem prob = BvldProblem::make(
        f_solve, prob_template.potential, prob_template.feasible);

    SolveResult res;
    try {
      switch (choice) {
        case SolverChoice::Exact:
          res = apply_exact(prob, p, opts.solve);
          break;
        case SolverChoice::Inexact:
          res = apply_inexact(prob, p, t - 1, opts.solve);
          break;
        case SolverChoice::QuasiNewton:
          res = apply_qn(prob, p, opts.solve);
          break;
      }
    } catch (const std::runtime_error& err) {
      throw DomainError("run_dynamics: solver failed at step " +
                        std::to_string(t) + ": " + err.what());
    }
    if (res.status == SolveStatus::DomainFailure)
      throw DomainError("run_dynamics: iterate left the domain at step " +
                        std::to_string(t));

    p = res.next_p;
    TraceRow row;
    row.t = t;
    row.p = p;
    row.pstar = equilibrium(b_true, pstar_prev);
    row.gap = std::max(0.0, bregman_div(prob_template.potential, p, row.pstar));
    row.drift =
        std::max(0.0, bregman_div(prob_template.potential, pstar_prev, row.pstar));
    row.kkt = res.kkt_residual;
    row.status = res.status;
    {
      const Objective f_true = base.with_linear_term(b_true);
      row.regret = f_true.value(p) - f_true.value(row.pstar);
    }
    if (trace.fejer_checked) {
      const double bound =
          (1.0 - trace.kappa) * trace.rows.back().gap + opts.fejer_tol;
      if (row.gap > bound) ++trace.fejer_violations;
    }
    trace.total_gap += row.gap;
    trace.cumulative_drift += row.drift;
    trace.regret_sum += row.regret;
    trace.rows.push_back(std::move(row));
    pstar_prev = trace.rows.back().pstar;
  }
  return trace;
}

DriftReport check_drift_bound(const IterateTrace& trace, double kappa,
                              double c) {
  if (trace.rows.size() < 2)
    throw InsufficientData("check_drift_bound: trace has no steps");
  if (!(kappa > 0.0 && kappa < 1.0))
    throw ConstantError("check_drift_bound: kappa must lie in (0, 1)");

  DriftReport rep;
  double v_t = 0.0;
  for (size_t i = 1; i < trace.rows.size(); ++i) {
    const double gap = trace.rows[i].gap;
    const double prev = trace.rows[i - 1].gap;
    const double w = trace.rows[i].drift;
    rep.lhs += gap;
    v_t += w;
    const double lemma = 2.0 * (1.0 - kappa) * (prev + w);
    if (gap > lemma + 1e-9) {
      ++rep.per_step_violations;
      rep.worst_per_step_excess =
          std::max(rep.worst_per_step_excess, gap - lemma);
    }
    if (gap > (1.0 - kappa) * prev + c * w + 1e-9) ++rep.normalized_violations;
  }
  rep.rhs = trace.rows.front().gap / kappa + (c / kappa) * v_t;
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs
                            : (rep.lhs > 0.0 ? std::numeric_limits<double>::infinity()
                                             : 0.0);
  rep.pass = rep.ratio <= 1.0 + 1e-6;
  return rep;
}

namespace {

FlowResult integrate_once(const BvldProblem& prob, const Point& p0,
                          double t_end, double dt, const Point& pstar) {
  const auto& psi = prob.potential;
  const auto& f = prob.objective;
  auto rhs = [&](const Point& x) -> Vec {
    psi.require_domain(x, "integrate_evi_flow");
    return -psi.grad_inv(f.grad(x));
  };

  FlowResult out;
  const int steps = int(std::ceil(t_end / dt - 1e-12));
  out.time.reserve(size_t(steps) + 1);
  out.energy.reserve(size_t(steps) + 1);
  Point p = p0;
  out.time.push_back(0.0);
  out.energy.push_back(std::max(0.0, bregman_div(psi, p, pstar)));
  for (int k = 0; k < steps; ++k) {
    const double h = std::min(dt, t_end - double(k) * dt);
    const Vec k1 = rhs(p);
    const Vec k2 = rhs(p + 0.5 * h * k1);
    const Vec k3 = rhs(p + 0.5 * h * k2);
    const Vec k4 = rhs(p + h * k3);
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    psi.require_domain(p, "integrate_evi_flow");
    out.time.push_back(std::min(double(k + 1) * dt, t_end));
    out.energy.push_back(std::max(0.0, bregman_div(psi, p, pstar)));
  }
  out.p_end = p;
  return out;
}

}  // namespace

FlowResult integrate_evi_flow(const BvldProblem& prob, const Point& p0,
                              double t_end, double dt,
                              const SolveOptions& opts) {
  if (!(t_end > 0.0)) throw ConfigError("flow.t_end", "must be positive");
  if (!(dt > 0.0)) throw ConfigError("flow.dt", "must be positive");
  const double cap =
      1e-2 * prob.potential.mu() / prob.objective.lipschitz();
  if (dt > cap)
    throw StepSizeError("integrate_evi_flow: dt " + std::to_string(dt) +
                        " exceeds the stability cap " + std::to_string(cap));
  prob.potential.require_domain(p0, "integrate_evi_flow(p0)");

  Point pstar;
  if (prob.objective.minimizer() &&
      prob.potential.in_domain(*prob.objective.minimizer())) {
    pstar = *prob.objective.minimizer();
  } else {
    Point p = p0;
    for (int k = 0; k < 20000; ++k) {
      const SolveResult r = apply_exact(prob, p, opts);
      const double move = (r.q - p).norm();
      p = r.q;
      if (move <= 1e-13 * std::max(1.0, p.norm())) break;
    }
    pstar = p;
  }

  FlowResult out;
  try {
    out = integrate_once(prob, p0, t_end, dt, pstar);
  } catch (const DomainError&) {
    try {
      out = integrate_once(prob, p0, t_end, 0.5 * dt, pstar);
    } catch (const DomainError&) {
      throw DomainError(
          "integrate_evi_flow: trajectory left the potential domain even "
          "after halving dt");
    }
  }

  // Exponential-rate fit of log E over the tail half of the window, where
  // the slowest mode dominates; the fit then lower-bounds every other mode's
  // decay, so the envelope E(t) <= e^{-lambda_hat t} E(0) holds on the whole
  // trajectory and lambda_hat recovers 2 lambda_min(A) for quadratics. Falls
  // back to the full positive prefix when the tail has underflowed.
  const double e0 = out.energy.front();
  std::vector<double> ts, ys;
  const double t_cut = 0.5 * t_end;
  for (int attempt = 0; attempt < 2 && ts.size() < 2; ++attempt) {
    ts.clear();
    ys.clear();
    const double cut = attempt == 0 ? t_cut : 0.0;
    for (size_t i = 0; i < out.energy.size(); ++i) {
      if (out.time[i] >= cut && out.energy[i] > 1e-290) {
        ts.push_back(out.time[i]);
        ys.push_back(std::log(out.energy[i]));
      }
    }
  }
  if (e0 <= 1e-290 || ts.size() < 2) {
    out.lambda_hat = 0.0;
    out.xi_integral = 0.0;
    out.decay_envelope_ok = true;
    out.rate_consistent = true;  // equilibrium start: nothing to measure
    return out;
  }
  double sx = 0, sy = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    sx += ts[i];
    sy += ys[i];
  }
  const double mx = sx / double(ts.size()), my = sy / double(ts.size());
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    sxx += (ts[i] - mx) * (ts[i] - mx);
    sxy += (ts[i] - mx) * (ys[i] - my);
  }
  out.lambda_hat = sxx > 0.0 ? -sxy / sxx : 0.0;

  out.rate_consistent = out.lambda_hat >= 0.8 * prob.kappa;

  out.decay_envelope_ok = true;
  for (size_t i = 0; i < out.energy.size(); ++i) {
    const double envl = std::exp(-out.lambda_hat * out.time[i]) * e0;
    if (out.energy[i] > envl * (1.0 + 1e-3)) {
      out.decay_envelope_ok = false;
      break;
    }
  }

  // Empirical forcing residual via central differences on the energy grid.
  out.xi_integral = 0.0;
  for (size_t i = 1; i + 1 < out.energy.size(); ++i) {
    const double h = out.time[i + 1] - out.time[i - 1];
    if (h <= 0.0) continue;
    const double de = (out.energy[i + 1] - out.energy[i - 1]) / h;
    const double xi = std::max(0.0, de + prob.kappa * out.energy[i]);
    out.xi_integral += xi * (out.time[i + 1] - out.time[i]);
  }
  return out;
}

const SweepCell& StabilityMap::at(size_t i_env, size_t i_obs) const {
  return cells.at(i_env * obs_values.size() + i_obs);
}

StabilityMap stability_sweep(const SweepSpec& spec) {
  if (spec.env_values.empty() || spec.obs_values.empty())
    throw ConfigError("sweep.grid", "both axes need at least one value");
  if (spec.reps <= 0) throw ConfigError("sweep.reps", "must be positive");
  if (spec.horizon <= 0) throw ConfigError("sweep.horizon", "must be positive");
  spec.solve.validate();

  const Objective base = Objective::quadratic(spec.a, spec.b0);
  if (!base.quad_invertible())
    throw SpectrumError("stability_sweep: A must be nonsingular");
  const int d = base.dim();
  const Potential psi = Potential::euclidean(d);
  const FeasibleSet whole = FeasibleSet::whole(d);
  const Point p0 = spec.p0.size() == d ? spec.p0 : Point(base.quad_solve(spec.b0));

  StabilityMap map;
  map.env_values = spec.env_values;
  map.obs_values = spec.obs_values;
  map.reps = spec.reps;
  map.horizon = spec.horizon;
  map.master_seed = spec.master_seed;
  map.cells.resize(spec.env_values.size() * spec.obs_values.size());

  auto run_cell = [&](size_t ie, size_t io) {
    SweepCell cell;
    cell.sigma_env = spec.env_values[ie];
    cell.sigma_obs = spec.obs_values[io];
    double sum = 0.0;
    bool failed = false;
    for (int rep = 0; rep < spec.reps && !failed; ++rep) {
      const std::uint64_t seed = derive_seed(spec.master_seed, ie, io, rep);
      const DriftSchedule sched = DriftSchedule::random_walk(
          spec.a, spec.b0, spec.horizon, seed, cell.sigma_env, cell.sigma_obs);
      const BvldProblem prob = BvldProblem::make(base, psi, whole);
      try {
        DynamicsOptions dopts;
        dopts.solve = spec.solve;
        dopts.check_fejer = false;
        const IterateTrace tr =
            run_dynamics(sched, prob, p0, spec.choice, dopts);
        sum += tr.normalized_regret();
      } catch (const std::runtime_error&) {
        failed = true;
      }
    }
    if (failed) {
      cell.solver_failed = true;
      cell.classification = 2;
      cell.mean_normalized_regret =
          std::numeric_limits<double>::quiet_NaN();
    } else {
      cell.mean_normalized_regret = sum / double(spec.reps);
      cell.classification = cell.mean_normalized_regret < kStableThreshold ? 0
                            : cell.mean_normalized_regret <= kUnstableThreshold
                                ? 1
                                : 2;
    }
    map.cells[ie * spec.obs_values.size() + io] = cell;
  };

  // Cells are independent; shard them over a fixed-size worker pool and
  // write results by index so the merge order never depends on scheduling.
  std::vector<std::pair<size_t, size_t>> tasks;
  for (size_t ie = 0; ie < spec.env_values.size(); ++ie)
    for (size_t io = 0; io < spec.obs_values.size(); ++io)
      tasks.emplace_back(ie, io);
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        run_cell(tasks[i].first, tasks[i].second);
      }
    });
  }
  for (auto& th : pool) th.join();

  // Plane through the origin fitted to the finite cell means.
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0, syy = 0;
  int n = 0;
  for (const auto& cell : map.cells) {
    if (!std::isfinite(cell.mean_normalized_regret)) continue;
    const double x1 = cell.sigma_env, x2 = cell.sigma_obs,
                 z = cell.mean_normalized_regret;
    s11 += x1 * x1;
    s12 += x1 * x2;
    s22 += x2 * x2;
    b1 += x1 * z;
    b2 += x2 * z;
    syy += z * z;
    ++n;
  }
  const double det = s11 * s22 - s12 * s12;
  if (n >= 3 && std::abs(det) > 1e-12) {
    map.c1 = (s22 * b1 - s12 * b2) / det;
    map.c2 = (s11 * b2 - s12 * b1) / det;
  } else if (s11 > 0.0) {
    map.c1 = b1 / s11;
    map.c2 = 0.0;
  }
  double ssres = 0.0;
  for (const auto& cell : map.cells) {
    if (!std::isfinite(cell.mean_normalized_regret)) continue;
    const double pred = map.c1 * cell.sigma_env + map.c2 * cell.sigma_obs;
    const double r = cell.mean_normalized_regret - pred;
    ssres += r * r;
  }
  map.r2 = syy > 0.0 ? 1.0 - ssres / syy : 1.0;
  return map;
}

}  // namespace bvld
