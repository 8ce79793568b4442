#include "bvld/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bvld/envelope.hpp"
#include "bvld/random.hpp"

namespace bvld {
namespace {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- schema ---

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known)
      throw ConfigError(where.empty() ? it.key() : where + "." + it.key(),
                        "unknown key");
  }
}

double get_num(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& field) {
  if (!j.is_number_unsigned())
    throw ConfigError(field, "expected an unsigned integer");
  return j.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) throw ConfigError(field, "expected a boolean");
  return j.get<bool>();
}

std::string get_str(const json& j, const std::string& field) {
  if (!j.is_string()) throw ConfigError(field, "expected a string");
  return j.get<std::string>();
}

Vec get_vec(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ConfigError(field, "expected a non-empty array of numbers");
  Vec v(int(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError(field + "[" + std::to_string(i) + "]",
                        "expected a number");
    v[int(i)] = j[i].get<double>();
  }
  return v;
}

std::vector<double> get_num_list(const json& j, const std::string& field) {
  const Vec v = get_vec(j, field);
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<int> get_int_list(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ConfigError(field, "expected a non-empty array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_int(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

Mat get_mat(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw ConfigError(field, "expected an array of rows");
  const int n = int(j.size());
  Mat m(n, n);
  for (int r = 0; r < n; ++r) {
    const std::string row_field = field + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || int(j[r].size()) != n)
      throw ConfigError(row_field,
                        "expected a row of " + std::to_string(n) + " numbers");
    for (int c = 0; c < n; ++c) {
      if (!j[r][c].is_number())
        throw ConfigError(row_field + "[" + std::to_string(c) + "]",
                          "expected a number");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    v[std::size_t(i)] = lo + (hi - lo) * double(i) / double(n - 1);
  return v;
}

// ------------------------------------------------------------- run pieces ---

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << text;
  if (!out) throw ParseError("failed while writing: " + path);
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max_iters";
    default: return "domain_failure";
  }
}

json meta_block(const RunConfig& cfg) {
  const std::string canon = canonical_config(cfg);
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(canon)));
  json m;
  m["config_hash"] = hex;
  m["seed"] = cfg.seed;
  m["version"] = kVersion;
  m["resolved_config"] = json::parse(canon);
  return m;
}

Potential build_potential(const RunConfig& cfg) {
  return cfg.potential_kind == "entropy"
             ? Potential::negative_entropy(cfg.dim)
             : Potential::euclidean(cfg.dim, cfg.mu);
}

FeasibleSet build_feasible(const RunConfig& cfg) {
  if (cfg.feasible_kind == "box") {
    const Vec lo = cfg.lower ? *cfg.lower : Vec(Vec::Constant(cfg.dim, -1.0));
    const Vec hi = cfg.upper ? *cfg.upper : Vec(Vec::Constant(cfg.dim, 1.0));
    return FeasibleSet::box(lo, hi);
  }
  if (cfg.feasible_kind == "simplex") return FeasibleSet::simplex(cfg.dim);
  return FeasibleSet::whole(cfg.dim);
}

// Quadratic instances expose their matrix and linear term so schedules can
// reuse them as the drift family.
Objective build_objective(const RunConfig& cfg, std::mt19937_64& rng,
                          Mat* a_out = nullptr, Vec* b_out = nullptr) {
  if (cfg.family == "quadratic") {
    const Mat a =
        cfg.matrix ? *cfg.matrix : random_spd(rng, cfg.dim, cfg.eig_lo, cfg.eig_hi);
    Vec b;
    if (cfg.linear_term)
      b = *cfg.linear_term;
    else if (cfg.feasible_kind == "simplex")
      b = a * random_simplex_interior(rng, cfg.dim);
    else
      b = a * gaussian_vec(rng, cfg.dim);
    if (a_out) *a_out = a;
    if (b_out) *b_out = b;
    return Objective::quadratic(a, b);
  }
  if (cfg.family == "linear")
    return Objective::linear(cfg.linear_term ? *cfg.linear_term
                                             : Vec(gaussian_vec(rng, cfg.dim)));
  if (cfg.family == "log_sum_exp")
    return Objective::log_sum_exp(cfg.dim, cfg.lse_scale);
  return Objective::huberized(
      cfg.huber_center ? *cfg.huber_center : Vec(gaussian_vec(rng, cfg.dim)),
      cfg.huber_delta);
}

Point default_p0(const RunConfig& cfg, const BvldProblem& prob,
                 std::mt19937_64& rng) {
  switch (prob.feasible.kind()) {
    case FeasibleSet::Kind::Simplex:
      return random_simplex_interior(rng, cfg.dim);
    case FeasibleSet::Kind::Box: {
      const Vec lo = prob.feasible.lower(), hi = prob.feasible.upper();
      Vec p(cfg.dim);
      for (int i = 0; i < cfg.dim; ++i)
        p[i] = lo[i] + (0.01 + 0.98 * uniform01(rng)) * (hi[i] - lo[i]);
      return p;
    }
    default:
      return gaussian_vec(rng, cfg.dim);
  }
}

Point resolve_p0(const RunConfig& cfg, const BvldProblem& prob) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 102));
  Point p = cfg.p0 ? *cfg.p0 : default_p0(cfg, prob, rng);
  if (!prob.potential.in_domain(p))
    throw ConfigError("p0", "outside the potential domain");
  if (!prob.feasible.contains(p, 1e-9))
    throw ConfigError("p0", "initial point is infeasible");
  return p;
}

SolverChoice build_choice(const RunConfig& cfg) {
  if (cfg.solver_choice == "qn") return SolverChoice::QuasiNewton;
  if (cfg.solver_choice == "inexact") return SolverChoice::Inexact;
  return SolverChoice::Exact;
}

json rate_json(const std::vector<double>& gaps) {
  json r;
  try {
    const RateEstimate est = estimate_rate(gaps);
    r["regime"] = est.regime == RateRegime::Finite
                      ? "finite"
                      : est.regime == RateRegime::Linear ? "linear"
                                                         : "sublinear";
    r["theta_hat"] = est.theta_hat;
    r["rho_hat"] = est.rho_hat;
    r["fit_r2"] = est.fit_r2;
    r["slope"] = est.slope;
    r["sublinear_exponent"] = est.sublinear_exponent;
    r["usable"] = est.usable;
  } catch (const std::exception& e) {
    r["regime"] = "unavailable";
    r["reason"] = e.what();
  }
  return r;
}

// ---------------------------------------------------------------- commands ---

int cmd_solve(const RunConfig& cfg, bool quiet) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 101));
  const BvldProblem prob = BvldProblem::make(
      build_objective(cfg, rng), build_potential(cfg), build_feasible(cfg));
  const Point p = resolve_p0(cfg, prob);

  SolveResult r;
  if (cfg.solver_choice == "qn")
    r = apply_qn(prob, p, cfg.solve);
  else if (cfg.solver_choice == "inexact")
    r = apply_inexact(prob, p, 0, cfg.solve);
  else
    r = apply_exact(prob, p, cfg.solve);

  json out;
  out["status"] = status_name(r.status);
  out["q"] = vec_json(r.q);
  out["next_p"] = vec_json(r.next_p);
  out["objective_value"] = r.objective_value;
  out["kkt_residual"] = r.kkt_residual;
  out["mirror_residual_norm"] = r.mirror_residual.norm();
  out["inner_iters"] = r.inner_iters;
  out["alpha"] = r.alpha;
  out["armijo_fallback"] = r.armijo_fallback;
  out["kappa"] = prob.kappa;
  out["meta"] = meta_block(cfg);
  const std::string path = cfg.out_prefix + "_solution.json";
  write_text(path, out.dump(2) + "\n");
  if (!quiet)
    std::cout << "solve: status=" << status_name(r.status)
              << " kkt=" << r.kkt_residual << " iters=" << r.inner_iters
              << " -> " << path << "\n";
  return r.status == SolveStatus::Converged ? 0 : 3;
}

int cmd_dynamics(const RunConfig& cfg, bool quiet) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 101));
  Mat a;
  Vec b0;
  const Objective f = build_objective(cfg, rng, &a, &b0);
  const BvldProblem prob =
      BvldProblem::make(f, build_potential(cfg), build_feasible(cfg));

  const std::uint64_t sched_seed = derive_seed(cfg.seed, 103);
  DriftSchedule sched;
  IngestResult ing;
  bool used_series = false;
  if (cfg.schedule_kind == "random_walk") {
    sched = DriftSchedule::random_walk(a, b0, cfg.horizon, sched_seed,
                                       cfg.sigma_env, cfg.sigma_obs);
  } else if (cfg.schedule_kind == "sinusoidal") {
    sched = DriftSchedule::sinusoidal(a, b0, cfg.horizon, sched_seed,
                                      cfg.amplitude, cfg.period, cfg.sigma_obs);
  } else if (cfg.schedule_kind == "piecewise") {
    sched = DriftSchedule::piecewise(a, b0, cfg.horizon, sched_seed, cfg.jumps,
                                     cfg.jump_scale, cfg.sigma_obs);
  } else if (cfg.schedule_kind == "external") {
    ing = ingest_series(cfg.series->path, cfg.series->column,
                        cfg.series->normalize);
    used_series = true;
    for (const auto& w : ing.warnings)
      if (!quiet) std::cerr << "warning: " << w << "\n";
    if (ing.constant) {
      sched = DriftSchedule::static_schedule(
          a, b0, int(ing.values.size()) - 1, sched_seed, cfg.sigma_obs);
    } else {
      // Series value v_t moves the equilibrium along the diagonal:
      // b_t = b0 + v_t A 1 / sqrt(d), so p*_t = p*_0 + v_t 1 / sqrt(d).
      const Vec dir = a * Vec::Ones(cfg.dim) / std::sqrt(double(cfg.dim));
      std::vector<Vec> targets;
      targets.reserve(ing.values.size());
      for (const double v : ing.values) targets.push_back(b0 + v * dir);
      sched = DriftSchedule::external_series(a, std::move(targets), sched_seed,
                                             cfg.sigma_obs);
    }
  } else {
    sched = DriftSchedule::static_schedule(a, b0, cfg.horizon, sched_seed,
                                           cfg.sigma_obs);
  }

  DynamicsOptions opts;
  opts.solve = cfg.solve;
  const IterateTrace tr =
      run_dynamics(sched, prob, resolve_p0(cfg, prob), build_choice(cfg), opts);

  std::ostringstream csv;
  tr.write_csv(csv);
  const std::string trace_path = cfg.out_prefix + "_trace.csv";
  write_text(trace_path, csv.str());

  json meta;
  meta["kappa"] = tr.kappa;
  meta["sigma_env"] = tr.sigma_env;
  meta["sigma_obs"] = tr.sigma_obs;
  meta["cumulative_drift"] = tr.cumulative_drift;
  meta["total_gap"] = tr.total_gap;
  meta["normalized_regret"] = tr.normalized_regret();
  meta["fejer"] =
      json{{"checked", tr.fejer_checked}, {"violations", tr.fejer_violations}};
  meta["rate"] = rate_json(tr.gap_series());
  if (used_series) {
    meta["series"] = json{{"sigma", ing.sigma},
                          {"constant", ing.constant},
                          {"warnings", ing.warnings}};
  }
  meta["meta"] = meta_block(cfg);
  const std::string meta_path = cfg.out_prefix + "_trace_meta.json";
  write_text(meta_path, meta.dump(2) + "\n");

  int failed = 0;
  for (const auto& row : tr.rows)
    if (row.status != SolveStatus::Converged) ++failed;
  if (!quiet)
    std::cout << "dynamics: steps=" << tr.rows.size() - 1
              << " normalized_regret=" << tr.normalized_regret()
              << " fejer_violations=" << tr.fejer_violations << " -> "
              << trace_path << ", " << meta_path << "\n";
  return failed == 0 ? 0 : 3;
}

int cmd_sweep(const RunConfig& cfg, bool quiet) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 101));
  Mat a;
  Vec b0;
  build_objective(cfg, rng, &a, &b0);

  SweepSpec spec;
  spec.env_values = cfg.env_values;
  spec.obs_values = cfg.obs_values;
  spec.reps = cfg.reps;
  spec.horizon = cfg.sweep_horizon;
  spec.master_seed = cfg.seed;
  spec.a = a;
  spec.b0 = b0;
  if (cfg.p0) spec.p0 = *cfg.p0;
  spec.choice = build_choice(cfg);
  spec.solve = cfg.solve;
  const StabilityMap map = stability_sweep(spec);

  json out;
  out["env_values"] = cfg.env_values;
  out["obs_values"] = cfg.obs_values;
  json cells = json::array();
  bool any_failed = false;
  for (const auto& c : map.cells) {
    any_failed = any_failed || c.solver_failed;
    cells.push_back(json{{"sigma_env", c.sigma_env},
                         {"sigma_obs", c.sigma_obs},
                         {"mean_normalized_regret", c.mean_normalized_regret},
                         {"classification", c.classification},
                         {"solver_failed", c.solver_failed}});
  }
  out["cells"] = std::move(cells);
  out["fit"] = json{{"c1", map.c1}, {"c2", map.c2}, {"r2", map.r2}};
  out["meta"] = meta_block(cfg);
  const std::string path = cfg.out_prefix + "_map.json";
  write_text(path, out.dump(2) + "\n");

  if (!quiet) {
    std::cout << "sweep: classification grid (rows = sigma_env, cols = "
                 "sigma_obs; 0 stable, 1 marginal, 2 unstable)\n";
    for (std::size_t i = 0; i < cfg.env_values.size(); ++i) {
      std::string line = "  ";
      for (std::size_t j = 0; j < cfg.obs_values.size(); ++j)
        line += std::to_string(map.at(int(i), int(j)).classification);
      std::cout << line << "\n";
    }
    std::cout << "fit: c1=" << map.c1 << " c2=" << map.c2 << " r2=" << map.r2
              << " -> " << path << "\n";
  }
  return any_failed ? 3 : 0;
}

int cmd_flow(const RunConfig& cfg, bool quiet) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 101));
  const BvldProblem prob = BvldProblem::make(
      build_objective(cfg, rng), build_potential(cfg), build_feasible(cfg));
  const FlowResult fr =
      integrate_evi_flow(prob, resolve_p0(cfg, prob), cfg.t_end, cfg.dt);

  std::string csv = "t,E\n";
  for (std::size_t i = 0; i < fr.time.size(); ++i)
    csv += fmt17(fr.time[i]) + "," + fmt17(fr.energy[i]) + "\n";
  const std::string csv_path = cfg.out_prefix + "_flow.csv";
  write_text(csv_path, csv);

  json meta;
  meta["lambda_hat"] = fr.lambda_hat;
  meta["xi_integral"] = fr.xi_integral;
  meta["decay_envelope_ok"] = fr.decay_envelope_ok;
  meta["rate_consistent"] = fr.rate_consistent;
  meta["kappa"] = prob.kappa;
  meta["p_end"] = vec_json(fr.p_end);
  meta["meta"] = meta_block(cfg);
  const std::string meta_path = cfg.out_prefix + "_flow_meta.json";
  write_text(meta_path, meta.dump(2) + "\n");
  if (!quiet)
    std::cout << "flow: lambda_hat=" << fr.lambda_hat
              << " envelope_ok=" << (fr.decay_envelope_ok ? "yes" : "no")
              << " -> " << csv_path << ", " << meta_path << "\n";
  return 0;
}

int cmd_dro(const RunConfig& cfg, bool quiet) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 104));
  const int atoms = cfg.dro_atoms;
  const Vec h = cfg.dro_weights ? *cfg.dro_weights
                                : Vec(Vec::Constant(atoms, 1.0 / atoms));
  const Vec losses =
      cfg.dro_losses ? *cfg.dro_losses : Vec(3.0 * gaussian_vec(rng, atoms));
  const auto kind = cfg.dro_divergence == "chi2"
                        ? AmbiguitySet::Divergence::ChiSquared
                        : AmbiguitySet::Divergence::KL;

  std::string csv = "rho,value,lambda_star,eta_star\n";
  for (const double rho : cfg.rho_grid) {
    const DroDual d = dro_envelope(AmbiguitySet::make(kind, rho, h), losses);
    csv += fmt17(rho) + "," + fmt17(d.value) + "," + fmt17(d.lambda_star) +
           "," + fmt17(d.eta_star) + "\n";
  }
  const std::string csv_path = cfg.out_prefix + "_dro.csv";
  write_text(csv_path, csv);

  const DroDual at_rho =
      dro_envelope(AmbiguitySet::make(kind, cfg.rho, h), losses);
  json meta;
  meta["divergence"] = cfg.dro_divergence;
  meta["rho"] = cfg.rho;
  meta["nominal_value"] = losses.dot(h);
  meta["robust_value"] = at_rho.value;
  meta["lambda_star"] = at_rho.lambda_star;
  meta["eta_star"] = at_rho.eta_star;
  meta["worst_weights"] = vec_json(at_rho.worst_weights);
  meta["losses"] = vec_json(losses);
  meta["weights"] = vec_json(h);
  meta["meta"] = meta_block(cfg);
  const std::string meta_path = cfg.out_prefix + "_dro_meta.json";
  write_text(meta_path, meta.dump(2) + "\n");
  if (!quiet)
    std::cout << "dro: robust=" << at_rho.value
              << " nominal=" << losses.dot(h) << " -> " << csv_path << ", "
              << meta_path << "\n";
  return 0;
}

int cmd_pareto(const RunConfig& cfg, bool quiet) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 105));
  const int d = cfg.dim;
  const Mat a1 = random_spd(rng, d, cfg.eig_lo, cfg.eig_hi);
  const Mat a2 = random_spd(rng, d, cfg.eig_lo, cfg.eig_hi);
  std::vector<Objective> objs;
  objs.push_back(Objective::quadratic(a1, a1 * gaussian_vec(rng, d)));
  objs.push_back(Objective::quadratic(a2, a2 * gaussian_vec(rng, d)));
  const ParetoProblem pp = ParetoProblem::make(objs);
  const Potential psi = build_potential(cfg);
  const FeasibleSet set = build_feasible(cfg);
  const BvldProblem shape = BvldProblem::make(objs[0], psi, set);
  const Point start = resolve_p0(cfg, shape);

  std::string csv = "w0,w1,f0,f1,kkt\n";
  bool all_converged = true;
  for (int i = 0; i < cfg.pareto_points; ++i) {
    Vec w(2);
    w[0] = double(i) / double(cfg.pareto_points - 1);
    w[1] = 1.0 - w[0];
    Point p = start;
    SolveResult last;
    for (int it = 0; it < 400; ++it) {
      last = pareto_bvld_step(pp, w, psi, set, p);
      const double move = (last.q - p).norm();
      p = last.q;
      if (move <= 1e-12) break;
    }
    all_converged = all_converged && last.status == SolveStatus::Converged;
    csv += fmt17(w[0]) + "," + fmt17(w[1]) + "," + fmt17(objs[0].value(p)) +
           "," + fmt17(objs[1].value(p)) + "," + fmt17(last.kkt_residual) +
           "\n";
  }
  const std::string csv_path = cfg.out_prefix + "_pareto.csv";
  write_text(csv_path, csv);

  json meta;
  meta["points"] = cfg.pareto_points;
  meta["l_max"] = pp.l_max;
  meta["meta"] = meta_block(cfg);
  const std::string meta_path = cfg.out_prefix + "_pareto_meta.json";
  write_text(meta_path, meta.dump(2) + "\n");
  if (!quiet)
    std::cout << "pareto: " << cfg.pareto_points << " frontier points -> "
              << csv_path << ", " << meta_path << "\n";
  return all_converged ? 0 : 3;
}

int cmd_verify(const RunConfig& cfg, bool quiet) {
  const VerifyReport rep = run_all_checks(cfg.seed);

  json out;
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back(json{{"name", r.name},
                        {"metric", r.metric},
                        {"value", r.value},
                        {"bound", r.bound},
                        {"pass", r.pass},
                        {"note", r.note}});
  out["rows"] = std::move(rows);
  out["all_pass"] = rep.all_pass;
  out["meta"] = meta_block(cfg);
  const std::string path = cfg.out_prefix + "_report.json";
  write_text(path, out.dump(2) + "\n");

  if (!quiet) {
    std::printf("%-30s %13s %13s  %s\n", "check", "value", "bound", "status");
    int passed = 0;
    for (const auto& r : rep.rows) {
      passed += r.pass ? 1 : 0;
      std::printf("%-30s %13.5g %13.5g  %s%s%s\n", r.name.c_str(), r.value,
                  r.bound, r.pass ? "pass" : "FAIL",
                  r.note.empty() ? "" : "  ", r.note.c_str());
    }
    std::printf("%d/%zu checks passed -> %s\n", passed, rep.rows.size(),
                path.c_str());
  }
  return rep.all_pass ? 0 : 4;
}

}  // namespace

// ------------------------------------------------------------------ public ---

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::Solve;
  if (name == "dynamics") return Command::Dynamics;
  if (name == "sweep") return Command::Sweep;
  if (name == "flow") return Command::Flow;
  if (name == "dro") return Command::Dro;
  if (name == "pareto") return Command::Pareto;
  if (name == "verify") return Command::Verify;
  throw ConfigError("command", "unknown command: " + name);
}

const char* command_name(Command c) {
  switch (c) {
    case Command::Solve: return "solve";
    case Command::Dynamics: return "dynamics";
    case Command::Sweep: return "sweep";
    case Command::Flow: return "flow";
    case Command::Dro: return "dro";
    case Command::Pareto: return "pareto";
    default: return "verify";
  }
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

RunConfig parse_config(const std::string& json_text, Command command) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  expect_object(root, "config");
  check_keys(root, "",
             {"seed", "out", "problem", "potential", "feasible", "solver",
              "schedule", "p0", "flow", "sweep", "dro", "pareto"});

  RunConfig cfg;
  cfg.command = command;
  if (root.contains("seed")) cfg.seed = get_u64(root["seed"], "seed");
  if (root.contains("out")) cfg.out_prefix = get_str(root["out"], "out");

  if (root.contains("problem")) {
    const json& p = root["problem"];
    expect_object(p, "problem");
    check_keys(p, "problem",
               {"family", "dim", "eig_lo", "eig_hi", "matrix", "linear_term",
                "scale", "delta", "center"});
    if (p.contains("family")) cfg.family = get_str(p["family"], "problem.family");
    if (p.contains("dim")) cfg.dim = get_int(p["dim"], "problem.dim");
    if (p.contains("eig_lo")) cfg.eig_lo = get_num(p["eig_lo"], "problem.eig_lo");
    if (p.contains("eig_hi")) cfg.eig_hi = get_num(p["eig_hi"], "problem.eig_hi");
    if (p.contains("matrix")) cfg.matrix = get_mat(p["matrix"], "problem.matrix");
    if (p.contains("linear_term"))
      cfg.linear_term = get_vec(p["linear_term"], "problem.linear_term");
    if (p.contains("scale")) cfg.lse_scale = get_num(p["scale"], "problem.scale");
    if (p.contains("delta")) cfg.huber_delta = get_num(p["delta"], "problem.delta");
    if (p.contains("center"))
      cfg.huber_center = get_vec(p["center"], "problem.center");
  }

  if (root.contains("potential")) {
    const json& p = root["potential"];
    expect_object(p, "potential");
    check_keys(p, "potential", {"kind", "mu"});
    if (p.contains("kind"))
      cfg.potential_kind = get_str(p["kind"], "potential.kind");
    if (p.contains("mu")) cfg.mu = get_num(p["mu"], "potential.mu");
  }

  if (root.contains("feasible")) {
    const json& p = root["feasible"];
    expect_object(p, "feasible");
    check_keys(p, "feasible", {"kind", "lower", "upper"});
    if (p.contains("kind"))
      cfg.feasible_kind = get_str(p["kind"], "feasible.kind");
    if (p.contains("lower")) cfg.lower = get_vec(p["lower"], "feasible.lower");
    if (p.contains("upper")) cfg.upper = get_vec(p["upper"], "feasible.upper");
  }

  if (root.contains("solver")) {
    const json& p = root["solver"];
    expect_object(p, "solver");
    check_keys(p, "solver",
               {"choice", "tol_stationarity", "tol_step", "max_inner_iters",
                "armijo_gamma", "armijo_beta", "delta0", "delta_rate",
                "curvature_guard"});
    if (p.contains("choice"))
      cfg.solver_choice = get_str(p["choice"], "solver.choice");
    if (p.contains("tol_stationarity"))
      cfg.solve.tol_stationarity =
          get_num(p["tol_stationarity"], "solver.tol_stationarity");
    if (p.contains("tol_step"))
      cfg.solve.tol_step = get_num(p["tol_step"], "solver.tol_step");
    if (p.contains("max_inner_iters"))
      cfg.solve.max_inner_iters =
          get_int(p["max_inner_iters"], "solver.max_inner_iters");
    if (p.contains("armijo_gamma"))
      cfg.solve.armijo_gamma = get_num(p["armijo_gamma"], "solver.armijo_gamma");
    if (p.contains("armijo_beta"))
      cfg.solve.armijo_beta = get_num(p["armijo_beta"], "solver.armijo_beta");
    if (p.contains("delta0"))
      cfg.solve.delta0 = get_num(p["delta0"], "solver.delta0");
    if (p.contains("delta_rate"))
      cfg.solve.delta_rate = get_num(p["delta_rate"], "solver.delta_rate");
    if (p.contains("curvature_guard"))
      cfg.solve.curvature_guard =
          get_num(p["curvature_guard"], "solver.curvature_guard");
  }

  if (root.contains("schedule")) {
    const json& p = root["schedule"];
    expect_object(p, "schedule");
    check_keys(p, "schedule",
               {"kind", "horizon", "sigma_env", "sigma_obs", "amplitude",
                "period", "jumps", "jump_scale", "series"});
    if (p.contains("kind"))
      cfg.schedule_kind = get_str(p["kind"], "schedule.kind");
    if (p.contains("horizon"))
      cfg.horizon = get_int(p["horizon"], "schedule.horizon");
    if (p.contains("sigma_env"))
      cfg.sigma_env = get_num(p["sigma_env"], "schedule.sigma_env");
    if (p.contains("sigma_obs"))
      cfg.sigma_obs = get_num(p["sigma_obs"], "schedule.sigma_obs");
    if (p.contains("amplitude"))
      cfg.amplitude = get_num(p["amplitude"], "schedule.amplitude");
    if (p.contains("period")) cfg.period = get_int(p["period"], "schedule.period");
    if (p.contains("jumps")) cfg.jumps = get_int_list(p["jumps"], "schedule.jumps");
    if (p.contains("jump_scale"))
      cfg.jump_scale = get_num(p["jump_scale"], "schedule.jump_scale");
    if (p.contains("series")) {
      const json& s = p["series"];
      expect_object(s, "schedule.series");
      check_keys(s, "schedule.series", {"path", "column", "normalize"});
      SeriesSpec spec;
      if (!s.contains("path"))
        throw ConfigError("schedule.series.path", "required");
      spec.path = get_str(s["path"], "schedule.series.path");
      if (!s.contains("column"))
        throw ConfigError("schedule.series.column", "required");
      spec.column = get_str(s["column"], "schedule.series.column");
      if (s.contains("normalize"))
        spec.normalize = get_bool(s["normalize"], "schedule.series.normalize");
      cfg.series = std::move(spec);
    }
  }

  if (root.contains("p0")) cfg.p0 = get_vec(root["p0"], "p0");

  if (root.contains("flow")) {
    const json& p = root["flow"];
    expect_object(p, "flow");
    check_keys(p, "flow", {"t_end", "dt"});
    if (p.contains("t_end")) cfg.t_end = get_num(p["t_end"], "flow.t_end");
    if (p.contains("dt")) cfg.dt = get_num(p["dt"], "flow.dt");
  }

  if (root.contains("sweep")) {
    const json& p = root["sweep"];
    expect_object(p, "sweep");
    check_keys(p, "sweep", {"env_values", "obs_values", "reps", "horizon"});
    if (p.contains("env_values"))
      cfg.env_values = get_num_list(p["env_values"], "sweep.env_values");
    if (p.contains("obs_values"))
      cfg.obs_values = get_num_list(p["obs_values"], "sweep.obs_values");
    if (p.contains("reps")) cfg.reps = get_int(p["reps"], "sweep.reps");
    if (p.contains("horizon"))
      cfg.sweep_horizon = get_int(p["horizon"], "sweep.horizon");
  }

  bool atoms_given = false;
  if (root.contains("dro")) {
    const json& p = root["dro"];
    expect_object(p, "dro");
    check_keys(p, "dro",
               {"divergence", "rho", "atoms", "weights", "losses", "rho_grid"});
    if (p.contains("divergence"))
      cfg.dro_divergence = get_str(p["divergence"], "dro.divergence");
    if (p.contains("rho")) cfg.rho = get_num(p["rho"], "dro.rho");
    if (p.contains("atoms")) {
      cfg.dro_atoms = get_int(p["atoms"], "dro.atoms");
      atoms_given = true;
    }
    if (p.contains("weights"))
      cfg.dro_weights = get_vec(p["weights"], "dro.weights");
    if (p.contains("losses")) cfg.dro_losses = get_vec(p["losses"], "dro.losses");
    if (p.contains("rho_grid"))
      cfg.rho_grid = get_num_list(p["rho_grid"], "dro.rho_grid");
  }

  if (root.contains("pareto")) {
    const json& p = root["pareto"];
    expect_object(p, "pareto");
    check_keys(p, "pareto", {"points"});
    if (p.contains("points"))
      cfg.pareto_points = get_int(p["points"], "pareto.points");
  }

  // defaults that depend on other fields
  if (cfg.env_values.empty()) cfg.env_values = linspace(0.0, 1.2, 8);
  if (cfg.obs_values.empty()) cfg.obs_values = linspace(0.0, 1.2, 8);
  if (cfg.rho_grid.empty())
    cfg.rho_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  if (cfg.schedule_kind == "piecewise" && cfg.jumps.empty())
    cfg.jumps = {cfg.horizon / 3, 2 * cfg.horizon / 3};
  if (cfg.dro_weights) {
    if (atoms_given && cfg.dro_atoms != int(cfg.dro_weights->size()))
      throw ConfigError("dro.atoms", "conflicts with the weights length");
    cfg.dro_atoms = int(cfg.dro_weights->size());
  }

  // semantic validation
  if (cfg.family != "quadratic" && cfg.family != "linear" &&
      cfg.family != "log_sum_exp" && cfg.family != "huberized")
    throw ConfigError("problem.family", "unknown family: " + cfg.family);
  if (cfg.dim < 1 || cfg.dim > 1000)
    throw ConfigError("problem.dim", "must lie in [1, 1000]");
  if (!(cfg.eig_lo > 0.0))
    throw ConfigError("problem.eig_lo", "must be positive");
  if (!(cfg.eig_hi >= cfg.eig_lo))
    throw ConfigError("problem.eig_hi", "must be >= eig_lo");
  if (!(cfg.lse_scale > 0.0))
    throw ConfigError("problem.scale", "must be positive");
  if (!(cfg.huber_delta > 0.0))
    throw ConfigError("problem.delta", "must be positive");
  if (cfg.matrix) {
    if (cfg.matrix->rows() != cfg.dim)
      throw ConfigError("problem.matrix",
                        "size must match problem.dim = " + std::to_string(cfg.dim));
    const double asym = (*cfg.matrix - cfg.matrix->transpose())
                            .cwiseAbs()
                            .maxCoeff();
    if (asym > 1e-12 * std::max(1.0, cfg.matrix->cwiseAbs().maxCoeff()))
      throw ConfigError("problem.matrix", "must be symmetric");
  }
  if (cfg.linear_term && cfg.linear_term->size() != cfg.dim)
    throw ConfigError("problem.linear_term",
                      "length must match problem.dim = " + std::to_string(cfg.dim));
  if (cfg.huber_center && cfg.huber_center->size() != cfg.dim)
    throw ConfigError("problem.center",
                      "length must match problem.dim = " + std::to_string(cfg.dim));

  if (cfg.potential_kind != "euclidean" && cfg.potential_kind != "entropy")
    throw ConfigError("potential.kind", "unknown kind: " + cfg.potential_kind);
  if (!(cfg.mu > 0.0)) throw ConfigError("potential.mu", "must be positive");
  if (cfg.potential_kind == "entropy" && cfg.mu != 1.0)
    throw ConfigError("potential.mu",
                      "negative entropy has fixed modulus 1 on the simplex");

  if (cfg.feasible_kind != "whole" && cfg.feasible_kind != "box" &&
      cfg.feasible_kind != "simplex")
    throw ConfigError("feasible.kind", "unknown kind: " + cfg.feasible_kind);
  if (cfg.lower && cfg.lower->size() != cfg.dim)
    throw ConfigError("feasible.lower",
                      "length must match problem.dim = " + std::to_string(cfg.dim));
  if (cfg.upper && cfg.upper->size() != cfg.dim)
    throw ConfigError("feasible.upper",
                      "length must match problem.dim = " + std::to_string(cfg.dim));
  if (cfg.lower && cfg.upper && ((*cfg.upper - *cfg.lower).minCoeff() <= 0.0))
    throw ConfigError("feasible.upper", "must exceed feasible.lower");
  if (cfg.potential_kind == "entropy") {
    if (cfg.feasible_kind == "whole")
      throw ConfigError("feasible.kind",
                        "negative entropy needs a positive feasible set "
                        "(simplex or a positive box)");
    if (cfg.feasible_kind == "box" && (!cfg.lower || cfg.lower->minCoeff() <= 0.0))
      throw ConfigError("feasible.lower",
                        "negative entropy needs strictly positive box bounds");
  }

  if (cfg.solver_choice != "exact" && cfg.solver_choice != "inexact" &&
      cfg.solver_choice != "qn")
    throw ConfigError("solver.choice", "unknown choice: " + cfg.solver_choice);
  cfg.solve.validate();

  if (cfg.schedule_kind != "static" && cfg.schedule_kind != "random_walk" &&
      cfg.schedule_kind != "sinusoidal" && cfg.schedule_kind != "piecewise" &&
      cfg.schedule_kind != "external")
    throw ConfigError("schedule.kind", "unknown kind: " + cfg.schedule_kind);
  if (cfg.horizon < 1) throw ConfigError("schedule.horizon", "must be >= 1");
  if (cfg.sigma_env < 0.0)
    throw ConfigError("schedule.sigma_env", "must be nonnegative");
  if (cfg.sigma_obs < 0.0)
    throw ConfigError("schedule.sigma_obs", "must be nonnegative");
  if (cfg.period < 2) throw ConfigError("schedule.period", "must be >= 2");
  if (cfg.jump_scale < 0.0)
    throw ConfigError("schedule.jump_scale", "must be nonnegative");
  for (std::size_t i = 0; i < cfg.jumps.size(); ++i) {
    if (cfg.jumps[i] < 1 || cfg.jumps[i] > cfg.horizon)
      throw ConfigError("schedule.jumps",
                        "jump times must lie in [1, horizon]");
    if (i > 0 && cfg.jumps[i] <= cfg.jumps[i - 1])
      throw ConfigError("schedule.jumps", "must be strictly increasing");
  }
  if (cfg.schedule_kind == "external" && !cfg.series)
    throw ConfigError("schedule.series",
                      "required when schedule.kind is external");

  if (cfg.p0 && cfg.p0->size() != cfg.dim)
    throw ConfigError("p0",
                      "length must match problem.dim = " + std::to_string(cfg.dim));

  if (!(cfg.t_end > 0.0)) throw ConfigError("flow.t_end", "must be positive");
  if (!(cfg.dt > 0.0)) throw ConfigError("flow.dt", "must be positive");

  if (cfg.reps < 1) throw ConfigError("sweep.reps", "must be >= 1");
  if (cfg.sweep_horizon < 2) throw ConfigError("sweep.horizon", "must be >= 2");
  for (const double v : cfg.env_values)
    if (v < 0.0) throw ConfigError("sweep.env_values", "must be nonnegative");
  for (const double v : cfg.obs_values)
    if (v < 0.0) throw ConfigError("sweep.obs_values", "must be nonnegative");

  if (cfg.dro_divergence != "kl" && cfg.dro_divergence != "chi2")
    throw ConfigError("dro.divergence", "unknown divergence: " + cfg.dro_divergence);
  if (!(cfg.rho > 0.0)) throw ConfigError("dro.rho", "must be positive");
  if (cfg.dro_atoms < 1 || cfg.dro_atoms > 64)
    throw ConfigError("dro.atoms", "must lie in [1, 64]");
  if (cfg.dro_losses && cfg.dro_losses->size() != cfg.dro_atoms)
    throw ConfigError("dro.losses", "length must match the atom count");
  for (const double r : cfg.rho_grid)
    if (!(r > 0.0)) throw ConfigError("dro.rho_grid", "radii must be positive");

  if (cfg.pareto_points < 2) throw ConfigError("pareto.points", "must be >= 2");

  // command-specific structure
  if ((command == Command::Dynamics || command == Command::Sweep) &&
      cfg.family != "quadratic")
    throw ConfigError("problem.family",
                      "dynamics and sweep run on the quadratic family");
  if (command == Command::Sweep) {
    if (cfg.potential_kind != "euclidean" || cfg.mu != 1.0)
      throw ConfigError("potential.kind",
                        "sweep runs on the unit euclidean potential");
    if (cfg.feasible_kind != "whole")
      throw ConfigError("feasible.kind", "sweep runs unconstrained");
  }

  return cfg;
}

std::string canonical_config(const RunConfig& cfg) {
  json c;
  c["command"] = command_name(cfg.command);
  c["seed"] = cfg.seed;
  c["out"] = cfg.out_prefix;

  json p;
  p["family"] = cfg.family;
  p["dim"] = cfg.dim;
  p["eig_lo"] = cfg.eig_lo;
  p["eig_hi"] = cfg.eig_hi;
  p["matrix"] = cfg.matrix ? mat_json(*cfg.matrix) : json();
  p["linear_term"] = cfg.linear_term ? vec_json(*cfg.linear_term) : json();
  p["scale"] = cfg.lse_scale;
  p["delta"] = cfg.huber_delta;
  p["center"] = cfg.huber_center ? vec_json(*cfg.huber_center) : json();
  c["problem"] = std::move(p);

  c["potential"] = json{{"kind", cfg.potential_kind}, {"mu", cfg.mu}};
  c["feasible"] = json{{"kind", cfg.feasible_kind},
                       {"lower", cfg.lower ? vec_json(*cfg.lower) : json()},
                       {"upper", cfg.upper ? vec_json(*cfg.upper) : json()}};
  c["solver"] = json{{"choice", cfg.solver_choice},
                     {"tol_stationarity", cfg.solve.tol_stationarity},
                     {"tol_step", cfg.solve.tol_step},
                     {"max_inner_iters", cfg.solve.max_inner_iters},
                     {"armijo_gamma", cfg.solve.armijo_gamma},
                     {"armijo_beta", cfg.solve.armijo_beta},
                     {"delta0", cfg.solve.delta0},
                     {"delta_rate", cfg.solve.delta_rate},
                     {"curvature_guard", cfg.solve.curvature_guard}};

  json s;
  s["kind"] = cfg.schedule_kind;
  s["horizon"] = cfg.horizon;
  s["sigma_env"] = cfg.sigma_env;
  s["sigma_obs"] = cfg.sigma_obs;
  s["amplitude"] = cfg.amplitude;
  s["period"] = cfg.period;
  s["jumps"] = cfg.jumps;
  s["jump_scale"] = cfg.jump_scale;
  if (cfg.series)
    s["series"] = json{{"path", cfg.series->path},
                       {"column", cfg.series->column},
                       {"normalize", cfg.series->normalize}};
  else
    s["series"] = json();
  c["schedule"] = std::move(s);

  c["p0"] = cfg.p0 ? vec_json(*cfg.p0) : json();
  c["flow"] = json{{"t_end", cfg.t_end}, {"dt", cfg.dt}};
  c["sweep"] = json{{"env_values", cfg.env_values},
                    {"obs_values", cfg.obs_values},
                    {"reps", cfg.reps},
                    {"horizon", cfg.sweep_horizon}};
  c["dro"] = json{{"divergence", cfg.dro_divergence},
                  {"rho", cfg.rho},
                  {"atoms", cfg.dro_atoms},
                  {"weights", cfg.dro_weights ? vec_json(*cfg.dro_weights) : json()},
                  {"losses", cfg.dro_losses ? vec_json(*cfg.dro_losses) : json()},
                  {"rho_grid", cfg.rho_grid}};
  c["pareto"] = json{{"points", cfg.pareto_points}};
  return c.dump();
}

IngestResult ingest_series(const std::string& path, const std::string& column,
                           bool normalize) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open series file: " + path);

  const auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : line) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(cur);
    for (auto& s : out) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }
    return out;
  };

  std::string line;
  if (!std::getline(in, line))
    throw EmptySeries(path + ": no header row");
  const std::vector<std::string> headers = split(line);
  int col = -1;
  for (std::size_t i = 0; i < headers.size(); ++i)
    if (headers[i] == column) col = int(i);
  if (col < 0) {
    std::string avail;
    for (std::size_t i = 0; i < headers.size(); ++i)
      avail += (i ? ", " : "") + headers[i];
    throw ParseError(path + ": column '" + column +
                     "' not found; available: " + avail);
  }

  std::vector<double> raw;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != headers.size())
      throw ParseError(path + ":row " + std::to_string(lineno) + ": expected " +
                       std::to_string(headers.size()) + " fields, found " +
                       std::to_string(fields.size()));
    const std::string& tok = fields[std::size_t(col)];
    std::size_t pos = 0;
    double v = 0.0;
    bool ok = !tok.empty();
    if (ok) {
      try {
        v = std::stod(tok, &pos);
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok || pos != tok.size())
      throw ParseError(path + ":row " + std::to_string(lineno) + ", column '" +
                       column + "': not numeric: '" + tok + "'");
    raw.push_back(v);
  }
  if (raw.size() < 2)
    throw EmptySeries(path + ": column '" + column +
                      "' has fewer than two data rows");

  const std::size_t n = raw.size();
  double mean = 0.0;
  for (const double v : raw) mean += v;
  mean /= double(n);
  double var = 0.0, amax = 0.0;
  for (const double v : raw) {
    var += (v - mean) * (v - mean);
    amax = std::max(amax, std::abs(v));
  }
  var /= double(n);

  IngestResult out;
  out.sigma = std::sqrt(var);
  if (out.sigma <= 1e-12 * std::max(1.0, amax)) {
    out.constant = true;
    out.values.assign(n, 0.0);
    out.warnings.push_back("column '" + column +
                           "' has zero variance; schedule degrades to static");
    return out;
  }
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = raw[i] - mean;
    if (normalize) out.values[i] /= out.sigma;
  }
  return out;
}

int run_command(const RunConfig& cfg, bool quiet) {
  switch (cfg.command) {
    case Command::Solve: return cmd_solve(cfg, quiet);
    case Command::Dynamics: return cmd_dynamics(cfg, quiet);
    case Command::Sweep: return cmd_sweep(cfg, quiet);
    case Command::Flow: return cmd_flow(cfg, quiet);
    case Command::Dro: return cmd_dro(cfg, quiet);
    case Command::Pareto: return cmd_pareto(cfg, quiet);
    default: return cmd_verify(cfg, quiet);
  }
}

int run_with_diagnostics(const RunConfig& cfg, bool quiet) {
  try {
    return run_command(cfg, quiet);
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid configuration at '" << e.field
              << "': " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const EmptySeries& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SpectrumError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConstantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const WeightError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StepSizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const LineSearchFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const BracketError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const InsufficientData& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const NoValidSamples& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const ConjugateUnavailable& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bvld
