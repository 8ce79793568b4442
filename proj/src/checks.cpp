#include "bvld/checks.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bvld/dynamics.hpp"
#include "bvld/envelope.hpp"
#include "bvld/random.hpp"

namespace bvld {
namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void add_row(VerifyReport& rep, const char* name, const char* metric,
             double value, double bound, bool pass, std::string note = "") {
  CheckRow r;
  r.name = name;
  r.metric = metric;
  r.value = value;
  r.bound = bound;
  r.pass = pass;
  r.note = std::move(note);
  rep.all_pass = rep.all_pass && pass;
  rep.rows.push_back(std::move(r));
}

Vec box_point(std::mt19937_64& rng, const Vec& lo, const Vec& hi,
              double shrink = 0.98) {
  Vec p(lo.size());
  for (int i = 0; i < lo.size(); ++i) {
    const double u = uniform01(rng);
    const double mid = 0.5 * (lo[i] + hi[i]);
    p[i] = mid + shrink * (lo[i] + u * (hi[i] - lo[i]) - mid);
  }
  return p;
}

struct SlopeFit {
  double slope = 0.0;
  double r2 = 0.0;
};

SlopeFit fit_slope(const std::vector<double>& xs,
                   const std::vector<double>& ys) {
  SlopeFit out;
  const size_t n = xs.size();
  if (n < 2) return out;
  double sx = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / double(n), my = sy / double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) return out;
  out.slope = sxy / sxx;
  if (syy > 0.0) {
    double ssres = 0;
    for (size_t i = 0; i < n; ++i) {
      const double r = ys[i] - my - out.slope * (xs[i] - mx);
      ssres += r * r;
    }
    out.r2 = 1.0 - ssres / syy;
  }
  return out;
}

void check_geometry(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 1));
  const int d = 6;
  const Potential euc = Potential::euclidean(d, 1.3);
  const Potential ent = Potential::negative_entropy(d);

  double tp = 0.0;           // three-point identity defect
  double lb = 1e300;         // lower quadratic bound slack
  double id_max = 0.0;       // D(x||x)
  double sep_min = 1e300;    // D on distinct pairs
  double rt = 0.0;           // mirror round-trip relative error
  auto scan = [&](const Potential& psi, auto draw, int triples) {
    for (int k = 0; k < triples; ++k) {
      const Vec x = draw(), y = draw(), z = draw();
      tp = std::max(tp, std::abs(three_point_residual(psi, x, y, z)));
      lb = std::min(lb, bregman_div(psi, x, y) -
                            0.5 * psi.mu() * (x - y).squaredNorm());
      if (k < 1000) {
        id_max = std::max(id_max, std::abs(bregman_div(psi, x, x)));
        sep_min = std::min(sep_min, bregman_div(psi, x, y));
        rt = std::max(rt, (psi.grad_inv(psi.grad(x)) - x).norm() /
                              std::max(1.0, x.norm()));
      }
    }
  };
  scan(euc, [&] { return Vec(gaussian_vec(rng, d)); }, 5000);
  scan(ent, [&] { return Vec(random_simplex_interior(rng, d)); }, 5000);

  add_row(rep, "geometry.three_point",
          "max |three-point identity defect| over 1e4 triples", tp, 1e-9,
          tp <= 1e-9);
  add_row(rep, "geometry.lower_bound",
          "min D - (mu/2)|x-y|^2 over 1e4 pairs", lb, -1e-12, lb >= -1e-12);
  add_row(rep, "geometry.identity", "max D(x||x) over 2e3 points", id_max,
          1e-10, id_max <= 1e-10,
          "min D on distinct pairs " + fmt(sep_min));
  add_row(rep, "geometry.mirror_roundtrip",
          "max rel |grad_inv(grad(x)) - x| over 2e3 points", rt, 1e-10,
          rt <= 1e-10);

  // Curvature coupling for quadratics with known L, in both geometries.
  double comp = 1e300;
  for (int i = 0; i < 3; ++i) {
    const Objective f =
        Objective::quadratic(random_spd(rng, d, 1.0, 8.0), Vec::Zero(d));
    const double l2 = f.lipschitz() * f.lipschitz();
    for (int k = 0; k < 1200; ++k) {
      const Vec x = gaussian_vec(rng, d), y = gaussian_vec(rng, d);
      comp = std::min(comp, bregman_div(euc, x, y) -
                                euc.mu() / (2.0 * l2) *
                                    (f.grad(x) - f.grad(y)).squaredNorm());
      const Vec xs = random_simplex_interior(rng, d),
                ys = random_simplex_interior(rng, d);
      comp = std::min(comp, bregman_div(ent, xs, ys) -
                                1.0 / (2.0 * l2) *
                                    (f.grad(xs) - f.grad(ys)).squaredNorm());
    }
  }
  add_row(rep, "geometry.compatibility",
          "min D - (mu/(2 L^2))|grad f(x)-grad f(y)|^2, quadratic f", comp,
          -1e-12, comp >= -1e-12);

  double coco = 1e300;
  for (int i = 0; i < 8; ++i) {
    const Objective f = Objective::quadratic(random_spd(rng, 5, 0.3, 6.0),
                                             gaussian_vec(rng, 5));
    for (int k = 0; k < 1000; ++k)
      coco = std::min(
          coco, cocoercivity_gap(f, gaussian_vec(rng, 5), gaussian_vec(rng, 5)));
  }
  const Objective lse = Objective::log_sum_exp(5, 0.5);
  const Objective hub = Objective::huberized(gaussian_vec(rng, 5), 0.7);
  for (int k = 0; k < 1000; ++k) {
    coco = std::min(coco, cocoercivity_gap(lse, gaussian_vec(rng, 5),
                                           gaussian_vec(rng, 5)));
    coco = std::min(coco, cocoercivity_gap(hub, gaussian_vec(rng, 5),
                                           gaussian_vec(rng, 5)));
  }
  add_row(rep, "geometry.cocoercivity",
          "min co-coercivity gap over 1e4 pairs (quad/lse/huber)", coco,
          -1e-10, coco >= -1e-10);
}

void check_problems(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 2));
  const int d = 5;
  std::vector<Objective> fams;
  fams.push_back(
      Objective::quadratic(random_spd(rng, d, 1.0, 8.0), gaussian_vec(rng, d)));
  fams.push_back(Objective::linear(gaussian_vec(rng, d)));
  fams.push_back(Objective::log_sum_exp(d, 0.5));
  fams.push_back(Objective::huberized(gaussian_vec(rng, d), 0.7));

  double cvx = 1e300, smo = -1e300, desc = -1e300;
  for (const auto& f : fams) {
    for (int k = 0; k < 2500; ++k) {
      const Vec x = gaussian_vec(rng, d), y = gaussian_vec(rng, d);
      const double fx = f.value(x), fy = f.value(y);
      const Vec gx = f.grad(x), gy = f.grad(y);
      const double linearization = fy - fx - gx.dot(y - x);
      cvx = std::min(cvx, linearization);
      smo = std::max(smo, (gx - gy).norm() - f.lipschitz() * (x - y).norm());
      desc = std::max(desc, linearization -
                                0.5 * f.lipschitz() * (y - x).squaredNorm());
    }
  }
  add_row(rep, "problems.convexity",
          "min f(y)-f(x)-<grad f(x),y-x> over 1e4 pairs, 4 families", cvx,
          -1e-10, cvx >= -1e-10);
  add_row(rep, "problems.smoothness", "max |grad f(x)-grad f(y)| - L |x-y|",
          smo, 1e-8, smo <= 1e-8);
  add_row(rep, "problems.descent_lemma",
          "max f(y)-f(x)-<grad f(x),y-x>-(L/2)|y-x|^2", desc, 1e-8,
          desc <= 1e-8);

  // Converged exact solutions must satisfy the first-order system.
  double kkt_max = 0.0;
  bool all_conv = true;
  std::string note_kkt;
  {
    const int dk = 4;
    const Potential eu = Potential::euclidean(dk, 1.0);
    const Mat a = random_spd(rng, dk, 1.0, 8.0);
    const Vec lo = Vec::Constant(dk, -0.3), hi = Vec::Constant(dk, 0.5);
    struct Inst {
      BvldProblem prob;
      Point p;
    };
    std::vector<Inst> insts;
    insts.push_back({BvldProblem::make(Objective::quadratic(a, a * Vec::Ones(dk)),
                                       eu, FeasibleSet::whole(dk)),
                     gaussian_vec(rng, dk)});
    insts.push_back({BvldProblem::make(Objective::quadratic(a, a * Vec::Ones(dk)),
                                       eu, FeasibleSet::box(lo, hi)),
                     box_point(rng, lo, hi)});
    insts.push_back({BvldProblem::make(Objective::huberized(gaussian_vec(rng, dk), 0.7),
                                       eu, FeasibleSet::whole(dk)),
                     gaussian_vec(rng, dk)});
    insts.push_back({BvldProblem::make(Objective::log_sum_exp(dk, 0.5), eu,
                                       FeasibleSet::box(lo, hi)),
                     box_point(rng, lo, hi)});
    insts.push_back({BvldProblem::make(Objective::quadratic(a, a * Vec::Ones(dk)),
                                       Potential::negative_entropy(dk),
                                       FeasibleSet::simplex(dk)),
                     random_simplex_interior(rng, dk)});
    int stalled = 0;
    for (const auto& in : insts) {
      const SolveResult r = apply_exact(in.prob, in.p);
      if (r.status != SolveStatus::Converged) ++stalled;
      all_conv = all_conv && r.status == SolveStatus::Converged;
      kkt_max = std::max(kkt_max, kkt_residual(in.prob, in.p, r.q));
    }
    if (stalled > 0) note_kkt = std::to_string(stalled) + " bundle(s) stalled";
  }
  add_row(rep, "problems.kkt_at_solution",
          "max kkt residual at converged exact solutions, 5 bundles", kkt_max,
          1e-8, all_conv && kkt_max < 1e-8, note_kkt);
}

void check_operator(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 3));

  double excess = -1e300, worst_ratio = 0.0;
  for (int i = 0; i < 10; ++i) {
    const int d = 2 * (i + 1);
    const Mat a = random_spd(rng, d, 1.0, 8.0);
    const Vec b = a * (0.5 * gaussian_vec(rng, d));
    FeasibleSet set = FeasibleSet::whole(d);
    if (i == 3)
      set = FeasibleSet::box(Vec::Constant(d, -0.7), Vec::Constant(d, 0.9));
    if (i == 7) set = FeasibleSet::simplex(d);
    const BvldProblem prob = BvldProblem::make(
        Objective::quadratic(a, b), Potential::euclidean(d, 1.0), set);
    auto draw = [&]() -> Vec {
      switch (prob.feasible.kind()) {
        case FeasibleSet::Kind::Box:
          return box_point(rng, prob.feasible.lower(), prob.feasible.upper());
        case FeasibleSet::Kind::Simplex:
          return random_simplex_interior(rng, d);
        default:
          return gaussian_vec(rng, d);
      }
    };
    for (int k = 0; k < 1000; ++k) {
      const Vec p = draw(), q = draw();
      const Vec tp = apply_exact(prob, p).q;
      const Vec tq = apply_exact(prob, q).q;
      const double dpq = bregman_div(prob.potential, p, q);
      const double dt = bregman_div(prob.potential, tp, tq);
      excess = std::max(excess, dt - (1.0 - prob.kappa) * dpq);
      if (dpq > 1e-12) worst_ratio = std::max(worst_ratio, dt / dpq);
    }
  }
  add_row(rep, "operator.contraction",
          "max D(Tp||Tq) - (1-kappa) D(p||q), 10 quadratics x 1e3 pairs",
          excess, 1e-9, excess <= 1e-9,
          "worst empirical ratio " + fmt(worst_ratio));

  // Variational-inequality form of single-step optimality.
  double vi_min = 1e300;
  bool vi_conv = true;
  {
    const int d = 5;
    const Mat a = random_spd(rng, d, 1.0, 6.0);
    const Vec b = a * gaussian_vec(rng, d);
    const Vec lo = Vec::Constant(d, -0.4), hi = Vec::Constant(d, 0.6);
    const Potential eu = Potential::euclidean(d, 1.0);
    const Potential en = Potential::negative_entropy(d);

    auto run_vi = [&](const BvldProblem& prob, auto draw_p, auto draw_r) {
      for (int i = 0; i < 3; ++i) {
        const Point p = draw_p();
        const SolveResult r = apply_exact(prob, p);
        vi_conv = vi_conv && r.status == SolveStatus::Converged;
        const Vec g = prob.objective.grad(r.q) + prob.potential.grad(r.q) -
                      prob.potential.grad(p);
        for (int j = 0; j < 100; ++j)
          vi_min = std::min(vi_min, g.dot(draw_r(r.q) - r.q));
      }
    };
    run_vi(BvldProblem::make(Objective::quadratic(a, b), eu,
                             FeasibleSet::box(lo, hi)),
           [&] { return Vec(box_point(rng, lo, hi)); },
           [&](const Vec&) { return Vec(box_point(rng, lo, hi)); });
    run_vi(BvldProblem::make(Objective::quadratic(a, b), eu,
                             FeasibleSet::simplex(d)),
           [&] { return Vec(random_simplex_interior(rng, d)); },
           [&](const Vec&) { return Vec(random_simplex_interior(rng, d)); });
    run_vi(BvldProblem::make(Objective::quadratic(a, b), en,
                             FeasibleSet::simplex(d)),
           [&] { return Vec(random_simplex_interior(rng, d)); },
           [&](const Vec&) { return Vec(random_simplex_interior(rng, d)); });
    run_vi(BvldProblem::make(Objective::huberized(gaussian_vec(rng, d), 0.7),
                             eu, FeasibleSet::whole(d)),
           [&] { return Vec(gaussian_vec(rng, d)); },
           [&](const Vec& q) { return Vec(q + gaussian_vec(rng, d)); });
  }
  add_row(rep, "operator.vi_optimality",
          "min <grad_q Phi(q), r - q> over 100 feasible r per solve", vi_min,
          -1e-8, vi_conv && vi_min >= -1e-8);
}

void check_solver(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 4));
  const int d = 5;
  const Vec lo = Vec::Constant(d, -0.5), hi = Vec::Constant(d, 0.8);
  const Vec lo1 = Vec::Constant(d, -1.0), hi1 = Vec::Constant(d, 1.0);
  const Potential eu = Potential::euclidean(d, 1.0);
  const Potential en = Potential::negative_entropy(d);
  const Mat a = random_spd(rng, d, 1.0, 8.0);

  // anchor kinds: 0 gaussian, 1 tight box, 2 unit box, 3 simplex
  struct Fam {
    BvldProblem prob;
    int anchor;
  };
  std::vector<Fam> fams;
  fams.push_back({BvldProblem::make(Objective::quadratic(a, gaussian_vec(rng, d)),
                                    eu, FeasibleSet::whole(d)),
                  0});
  fams.push_back({BvldProblem::make(Objective::quadratic(a, a * Vec::Ones(d)),
                                    eu, FeasibleSet::box(lo, hi)),
                  1});
  fams.push_back({BvldProblem::make(Objective::huberized(gaussian_vec(rng, d), 0.7),
                                    eu, FeasibleSet::whole(d)),
                  0});
  fams.push_back({BvldProblem::make(Objective::log_sum_exp(d, 0.5), eu,
                                    FeasibleSet::box(lo1, hi1)),
                  2});
  fams.push_back({BvldProblem::make(Objective::linear(gaussian_vec(rng, d)), en,
                                    FeasibleSet::simplex(d)),
                  3});
  fams.push_back({BvldProblem::make(
                      Objective::quadratic(a, a * Vec::Constant(d, 0.25)), en,
                      FeasibleSet::simplex(d)),
                  3});
  fams.push_back({BvldProblem::make(Objective::linear(gaussian_vec(rng, d)), eu,
                                    FeasibleSet::box(lo1, hi1)),
                  2});

  double agree = 0.0, descent = -1e300;
  for (const auto& fam : fams) {
    for (int i = 0; i < 5; ++i) {
      Point p;
      switch (fam.anchor) {
        case 1: p = box_point(rng, lo, hi); break;
        case 2: p = box_point(rng, lo1, hi1); break;
        case 3: p = random_simplex_interior(rng, d); break;
        default: p = gaussian_vec(rng, d); break;
      }
      const SolveResult ex = apply_exact(fam.prob, p);
      const SolveResult qn = apply_qn(fam.prob, p);
      const SolveResult inx = apply_inexact(fam.prob, p, 60);
      agree = std::max({agree, (ex.q - qn.q).norm(), (ex.q - inx.q).norm(),
                        (qn.q - inx.q).norm()});
      const double phi_p = bvld_objective(fam.prob, p, p);
      descent = std::max({descent, ex.objective_value - phi_p,
                          qn.objective_value - phi_p});
    }
  }
  add_row(rep, "solver.agreement",
          "max pairwise |q| gap, exact vs inexact(t=60) vs quasi-Newton, "
          "7 families x 5 anchors",
          agree, 1e-6, agree <= 1e-6);
  add_row(rep, "solver.descent", "max Phi(q; p) - Phi(p; p) over all solves",
          descent, 1e-12, descent <= 1e-12);

  double qn_kkt = 0.0;
  int qn_iters = 0;
  bool qn_ok = true;
  {
    SolveOptions o;
    o.tol_stationarity = 0.99e-9;
    o.max_inner_iters = 50;
    for (int i = 0; i < 3; ++i) {
      const int dq = 100;
      const BvldProblem prob = BvldProblem::make(
          Objective::quadratic(random_spd(rng, dq, 1.0, 8.0),
                               gaussian_vec(rng, dq)),
          Potential::euclidean(dq, 1.0), FeasibleSet::whole(dq));
      for (int j = 0; j < 2; ++j) {
        const SolveResult r = apply_qn(prob, 2.0 * gaussian_vec(rng, dq), o);
        qn_ok = qn_ok && r.status == SolveStatus::Converged &&
                r.inner_iters <= 50;
        qn_kkt = std::max(qn_kkt, r.kkt_residual);
        qn_iters = std::max(qn_iters, r.inner_iters);
      }
    }
  }
  add_row(rep, "solver.qn_quadratic",
          "max kkt residual on dim-100 quadratics (iteration cap 50)", qn_kkt,
          1e-9, qn_ok && qn_kkt < 1e-9,
          "max inner iterations " + std::to_string(qn_iters));

  // Inexactness certificate: value gap against delta_t.
  double cert = -1e300;
  {
    const BvldProblem prob = BvldProblem::make(
        Objective::quadratic(a, a * Vec::Ones(d)), eu, FeasibleSet::box(lo, hi));
    const SolveOptions o;
    for (int t : {0, 3, 10}) {
      const double delta_t = o.delta0 * std::pow(o.delta_rate, double(t));
      for (int i = 0; i < 3; ++i) {
        const Point p = box_point(rng, lo, hi);
        const double phi_star = apply_exact(prob, p).objective_value;
        const SolveResult r = apply_inexact(prob, p, t, o);
        cert = std::max(cert, (r.objective_value - phi_star) - delta_t);
      }
    }
  }
  add_row(rep, "solver.inexact_gap",
          "max (Phi(q_t) - Phi*) - delta_t at t in {0,3,10}", cert, 1e-9,
          cert <= 1e-9);
}

void check_envelope(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 5));
  const int d = 5;
  const Potential eu = Potential::euclidean(d, 1.0);
  const Mat a = random_spd(rng, d, 1.0, 8.0);
  const Vec b = a * gaussian_vec(rng, d);
  const BvldProblem quad = BvldProblem::make(Objective::quadratic(a, b), eu,
                                             FeasibleSet::whole(d));
  const BvldProblem hub = BvldProblem::make(
      Objective::huberized(gaussian_vec(rng, d), 0.7), eu, FeasibleSet::whole(d));
  const Vec lo1 = Vec::Constant(d, -1.0), hi1 = Vec::Constant(d, 1.0);
  const BvldProblem lseb = BvldProblem::make(Objective::log_sum_exp(d, 0.5), eu,
                                             FeasibleSet::box(lo1, hi1));

  double vc = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Point p = gaussian_vec(rng, d);
    const EnvelopeEval e = envelope_eval(quad, p);
    vc = std::max(vc, std::abs(e.value - (quad.objective.value(e.argmin) +
                                          bregman_div(eu, e.argmin, p))));
  }
  add_row(rep, "envelope.value_consistency",
          "max |E(p) - Phi(argmin; p)| recomputed", vc, 1e-10, vc <= 1e-10);

  double fd = 0.0;
  auto fd_check = [&](const BvldProblem& prob, auto draw_p) {
    for (int k = 0; k < 4; ++k) {
      const Point p = draw_p();
      const EnvelopeEval e = envelope_eval(prob, p);
      for (int j = 0; j < 3; ++j) {
        Vec dir = gaussian_vec(rng, d);
        dir.normalize();
        const double eps = 1e-5;
        const double ep = envelope_eval(prob, p + eps * dir).value;
        const double em = envelope_eval(prob, p - eps * dir).value;
        const double an = e.mirror_grad.dot(dir);
        fd = std::max(fd, std::abs((ep - em) / (2.0 * eps) - an) /
                              std::max(1.0, std::abs(an)));
      }
    }
  };
  fd_check(quad, [&] { return Vec(gaussian_vec(rng, d)); });
  fd_check(hub, [&] { return Vec(gaussian_vec(rng, d)); });
  fd_check(lseb, [&] { return Vec(box_point(rng, lo1, hi1)); });
  add_row(rep, "envelope.gradient_fd",
          "max rel |central difference - <mirror_grad, dir>|, 3 objectives",
          fd, 1e-5, fd <= 1e-5);

  double gap_abs = 0.0, gap_min = 1e300;
  for (int k = 0; k < 100; ++k) {
    const double g = dual_gap(quad, gaussian_vec(rng, d));
    gap_abs = std::max(gap_abs, std::abs(g));
    gap_min = std::min(gap_min, g);
  }
  const BvldProblem entlin =
      BvldProblem::make(Objective::linear(gaussian_vec(rng, d)),
                        Potential::negative_entropy(d), FeasibleSet::simplex(d));
  for (int k = 0; k < 100; ++k) {
    const double g = dual_gap(entlin, random_simplex_interior(rng, d));
    gap_abs = std::max(gap_abs, std::abs(g));
    gap_min = std::min(gap_min, g);
  }
  add_row(rep, "envelope.dual_gap",
          "max |E(p) - dual at y*|, both conjugate pairings, 200 anchors",
          gap_abs, 1e-8, gap_abs <= 1e-8, "min signed gap " + fmt(gap_min));

  int viol = 0;
  {
    const Point pfix = quad.objective.quad_solve(b);
    const EnvelopeEval efix = envelope_eval(quad, pfix);
    if (!(efix.mirror_grad.norm() < 1e-10 &&
          (pfix - efix.argmin).norm() < 1e-8))
      ++viol;
    for (int k = 0; k < 30; ++k) {
      const Point p = gaussian_vec(rng, d);
      const EnvelopeEval e = envelope_eval(quad, p);
      const double mg = e.mirror_grad.norm();
      const double disp = (p - e.argmin).norm();
      if (disp < 1e-4) continue;  // too near the fixed point to separate
      if ((mg < 1e-10) != (disp < 1e-8)) ++viol;
    }
  }
  add_row(rep, "envelope.grad_zero_iff_fixed",
          "violations of |mirror_grad| < 1e-10 <=> |p - T(p)| < 1e-8", viol,
          0, viol == 0);

  {
    const Vec center = gaussian_vec(rng, d);
    const BvldProblem shifted = BvldProblem::make(
        Objective::quadratic(Mat::Identity(d, d), center), eu,
        FeasibleSet::whole(d));
    std::vector<Point> samples;
    for (int k = 0; k < 25; ++k)
      samples.push_back(center + 2.0 * gaussian_vec(rng, d));
    const double lam = pl_constant_probe(shifted, samples);
    add_row(rep, "envelope.pl_probe",
            "|lambda_hat - 0.5| for f = 0.5 |q - a|^2", std::abs(lam - 0.5),
            1e-8, std::abs(lam - 0.5) <= 1e-8);
  }
}

void check_rates(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 6));
  const int d = 4, horizon = 100;
  const Mat a = random_spd(rng, d, 1.0, 8.0);

  std::vector<IterateTrace> runs;
  {
    const Vec b0 = a * gaussian_vec(rng, d);
    const auto sched =
        DriftSchedule::static_schedule(a, b0, horizon, derive_seed(seed, 6, 1));
    const BvldProblem prob = BvldProblem::make(
        Objective::quadratic(a, b0), Potential::euclidean(d, 1.0),
        FeasibleSet::whole(d));
    const Point p0 = prob.objective.quad_solve(b0) + 2.0 * gaussian_vec(rng, d);
    runs.push_back(run_dynamics(sched, prob, p0, SolverChoice::Exact));
  }
  {
    const Vec lo = Vec::Constant(d, -0.3), hi = Vec::Constant(d, 0.5);
    const Vec b0 = a * Vec::Constant(d, 0.8);  // equilibrium pins the box
    const auto sched =
        DriftSchedule::static_schedule(a, b0, horizon, derive_seed(seed, 6, 2));
    const BvldProblem prob =
        BvldProblem::make(Objective::quadratic(a, b0),
                          Potential::euclidean(d, 1.0), FeasibleSet::box(lo, hi));
    runs.push_back(
        run_dynamics(sched, prob, box_point(rng, lo, hi), SolverChoice::QuasiNewton));
  }
  {
    Vec target(d);
    target << 0.4, 0.3, 0.2, 0.1;
    const Vec b0 = a * target;
    const auto sched =
        DriftSchedule::static_schedule(a, b0, horizon, derive_seed(seed, 6, 3));
    const BvldProblem prob = BvldProblem::make(
        Objective::quadratic(a, b0), Potential::negative_entropy(d),
        FeasibleSet::simplex(d));
    runs.push_back(run_dynamics(sched, prob, random_simplex_interior(rng, d),
                                SolverChoice::QuasiNewton));
  }

  int viol = 0;
  bool checked = true;
  int fitted = 0;
  double slope_excess = -1e300;
  for (const auto& tr : runs) {
    viol += tr.fejer_violations;
    checked = checked && tr.fejer_checked;
    std::vector<double> ts, ys;
    const auto gaps = tr.gap_series();
    for (size_t t = 0; t < gaps.size(); ++t) {
      if (gaps[t] <= 1e-14) break;
      ts.push_back(double(t));
      ys.push_back(std::log(gaps[t]));
    }
    // A run that lands on its equilibrium within a step or two (a pinned box
    // corner does this) leaves nothing to fit; the per-step Fejer row above
    // still covers it.
    if (ts.size() < 3) continue;
    ++fitted;
    slope_excess = std::max(
        slope_excess, fit_slope(ts, ys).slope - std::log(1.0 - tr.kappa));
  }
  if (fitted == 0) slope_excess = 0.0;
  add_row(rep, "fejer.static",
          "Fejer violations across 3 static 100-step runs "
          "(whole / box / simplex)",
          viol, 0, checked && viol == 0);
  add_row(rep, "fejer.slope",
          "max fitted log D slope minus log(1 - kappa)", slope_excess, 0.05,
          slope_excess <= 0.05,
          std::to_string(fitted) + " of 3 series long enough to fit");

  const RateEstimate est = estimate_rate(runs.front().gap_series());
  const double kap = runs.front().kappa;
  add_row(rep, "rate.classification",
          "rho_hat on a static contraction run (regime must be Linear)",
          est.rho_hat, kap - 0.1,
          est.regime == RateRegime::Linear && est.rho_hat >= kap - 0.1,
          "r2 " + fmt(est.fit_r2) + ", usable points " +
              std::to_string(est.usable));
}

void check_drift(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 7));
  const int d = 6, horizon = 500;
  const double sig[3] = {0.1, 0.5, 1.0};
  const Mat a = random_spd(rng, d, 1.0, 8.0);
  const Vec b0 = a * Vec::Ones(d);
  const BvldProblem prob =
      BvldProblem::make(Objective::quadratic(a, b0), Potential::euclidean(d, 1.0),
                        FeasibleSet::whole(d));
  double worst_ratio = 0.0;
  int lemma_viol = 0, norm_viol = 0;
  bool all_pass = true;
  for (int i = 0; i < 20; ++i) {
    const auto sched = DriftSchedule::random_walk(
        a, b0, horizon, derive_seed(seed, 7, std::uint64_t(i) + 1), sig[i % 3]);
    const Point p0 = Vec::Ones(d) + gaussian_vec(rng, d);
    const IterateTrace tr = run_dynamics(sched, prob, p0, SolverChoice::Exact);
    const DriftReport dr =
        check_drift_bound(tr, tr.kappa, 2.0 * (1.0 - tr.kappa));
    worst_ratio = std::max(worst_ratio, dr.ratio);
    lemma_viol += dr.per_step_violations;
    norm_viol += dr.normalized_violations;
    all_pass = all_pass && dr.pass;
  }
  add_row(rep, "drift.ratio",
          "max sum D_t / ((1/kappa) D_0 + (C/kappa) V_T), 20 random walks, "
          "T=500",
          worst_ratio, 1.0 + 1e-6, all_pass && worst_ratio <= 1.0 + 1e-6);
  add_row(rep, "drift.per_step",
          "per-step tracking inequality violations (lemma + normalized)",
          double(lemma_viol + norm_viol), 0, lemma_viol + norm_viol == 0,
          "lemma " + std::to_string(lemma_viol) + ", normalized " +
              std::to_string(norm_viol));
}

void check_lyapunov(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 8));
  const int d = 4, horizon = 300;
  const Mat a = random_spd(rng, d, 1.0, 8.0);
  const Vec b0 = a * Vec::Ones(d);
  const auto sched = DriftSchedule::sinusoidal(a, b0, horizon,
                                               derive_seed(seed, 8, 1), 1.0, 25);
  const BvldProblem prob =
      BvldProblem::make(Objective::quadratic(a, b0), Potential::euclidean(d, 1.0),
                        FeasibleSet::whole(d));
  const Point p0 = Vec::Ones(d) + 2.0 * gaussian_vec(rng, d);
  const IterateTrace tr = run_dynamics(sched, prob, p0, SolverChoice::Exact);

  double wmax = 0.0, tail = 0.0;
  for (size_t t = 1; t < tr.rows.size(); ++t)
    wmax = std::max(wmax, tr.rows[t].drift);
  for (size_t t = tr.rows.size() / 2; t < tr.rows.size(); ++t)
    tail = std::max(tail, tr.rows[t].gap);
  const double c = 2.0 * (1.0 - tr.kappa);
  const double bound = (c / tr.kappa) * wmax * (1.0 + 1e-6) + 1e-12;
  add_row(rep, "lyapunov.orbit",
          "max tail D_t (t > T/2) under periodic drift vs steady budget "
          "(C/kappa) max W",
          tail, bound, tail <= bound, "max W " + fmt(wmax));
}

void check_flow(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 9));
  double xi_max = 0.0;
  {
    const int d = 4;
    const BvldProblem iso = BvldProblem::make(
        Objective::quadratic(Mat::Identity(d, d), Vec::Zero(d)),
        Potential::euclidean(d, 1.0), FeasibleSet::whole(d));
    const FlowResult fr =
        integrate_evi_flow(iso, 2.0 * gaussian_vec(rng, d), 3.0, 1e-3);
    xi_max = std::max(xi_max, fr.xi_integral);
    add_row(rep, "flow.isotropic_rate",
            "|lambda_hat - 2| for f = 0.5 |q|^2 at dt = 1e-3",
            std::abs(fr.lambda_hat - 2.0), 0.02,
            std::abs(fr.lambda_hat - 2.0) <= 0.02 && fr.decay_envelope_ok);
  }
  {
    const int d = 5;
    const Mat a = random_spd(rng, d, 1.0, 8.0);
    const Vec b = a * gaussian_vec(rng, d);
    const BvldProblem gen = BvldProblem::make(
        Objective::quadratic(a, b), Potential::euclidean(d, 1.0),
        FeasibleSet::whole(d));
    // Start along the minimal-curvature eigenvector: the flow then stays in
    // that eigenspace and the fitted rate must equal 2 lambda_min exactly,
    // not just asymptotically. A generic start mixes modes, and with a small
    // spectral gap the fit window never isolates the slow one.
    const Vec v_min =
        Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvectors().col(0);
    const Point p0 =
        gen.objective.quad_solve(b) + (1.0 + uniform01(rng)) * v_min;
    const FlowResult fr = integrate_evi_flow(gen, p0, 3.0, 1e-3);
    const double lam_true = 2.0 * gen.objective.quad_eig_min();
    const double rel = std::abs(fr.lambda_hat / lam_true - 1.0);
    xi_max = std::max(xi_max, fr.xi_integral);
    add_row(rep, "flow.general_quadratic",
            "|lambda_hat / (2 lambda_min) - 1|, static quadratic flow started "
            "in the slow eigenspace",
            rel, 0.01,
            rel <= 0.01 && fr.decay_envelope_ok && fr.rate_consistent,
            "lambda_hat " + fmt(fr.lambda_hat) + ", kappa " + fmt(gen.kappa));
  }
  add_row(rep, "flow.static_forcing",
          "max forcing integral of max(0, dE/dt + kappa E), static flows",
          xi_max, 1e-12, xi_max <= 1e-12);
}

void check_dro(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 10));
  const double rhos[4] = {0.05, 0.1, 0.3, 0.7};

  double rel_max = 0.0;
  for (int div = 0; div < 2; ++div) {
    const auto kind = div == 0 ? AmbiguitySet::Divergence::KL
                               : AmbiguitySet::Divergence::ChiSquared;
    for (int i = 0; i < 8; ++i) {
      const Vec h = random_simplex_interior(rng, 5, 0.04);
      const Vec losses = 3.0 * gaussian_vec(rng, 5);
      const AmbiguitySet amb = AmbiguitySet::make(kind, rhos[i % 4], h);
      const DroDual dual = dro_envelope(amb, losses);
      const double primal = dro_primal_bruteforce(
          amb, losses, 4000,
          derive_seed(seed, 10, 100 + std::uint64_t(div * 8 + i)));
      rel_max = std::max(rel_max, std::abs(dual.value - primal) /
                                      std::max(1.0, std::abs(dual.value)));
    }
  }
  add_row(rep, "dro.duality",
          "max rel |dual - primal brute force|, 8 KL + 8 chi^2 instances "
          "(J=5)",
          rel_max, 1e-3, rel_max <= 1e-3);

  double form_diff = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec h = random_simplex_interior(rng, 5, 0.04);
    const Vec losses = 2.0 * gaussian_vec(rng, 5);
    const AmbiguitySet amb =
        AmbiguitySet::make(AmbiguitySet::Divergence::KL, 0.2, h);
    for (const double lam : {0.1, 0.5, 1.0, 5.0})
      form_diff = std::max(
          form_diff, std::abs(dro_dual_profile(amb, losses, lam, false) -
                              dro_dual_profile(amb, losses, lam, true)));
  }
  add_row(rep, "dro.two_forms",
          "max |closed-form eta vs Newton eta| on a KL lambda grid",
          form_diff, 1e-9, form_diff <= 1e-9);

  int mono_viol = 0;
  const double rho_grid[6] = {0.01, 0.05, 0.1, 0.3, 0.7, 1.5};
  for (int div = 0; div < 2; ++div) {
    const auto kind = div == 0 ? AmbiguitySet::Divergence::KL
                               : AmbiguitySet::Divergence::ChiSquared;
    for (int i = 0; i < 3; ++i) {
      const Vec h = random_simplex_interior(rng, 5, 0.04);
      const Vec losses = 3.0 * gaussian_vec(rng, 5);
      double prev = -1e300;
      for (const double rho : rho_grid) {
        const double v =
            dro_envelope(AmbiguitySet::make(kind, rho, h), losses).value;
        if (v < prev - 1e-9) ++mono_viol;
        prev = v;
      }
    }
  }
  add_row(rep, "dro.monotonicity",
          "robust-value monotonicity violations along a rho grid", mono_viol,
          0, mono_viol == 0);

  double excess = -1e300;
  {
    const int d = 4, atoms = 5;
    std::vector<Objective> losses;
    double lmax = 0.0;
    for (int j = 0; j < atoms; ++j) {
      losses.push_back(Objective::quadratic(random_spd(rng, d, 1.0, 6.0),
                                            gaussian_vec(rng, d)));
      lmax = std::max(lmax, losses.back().lipschitz());
    }
    const AmbiguitySet amb = AmbiguitySet::make(
        AmbiguitySet::Divergence::KL, 0.15, random_simplex_interior(rng, atoms, 0.04));
    const Potential eu = Potential::euclidean(d, 1.0);
    const FeasibleSet whole = FeasibleSet::whole(d);
    const double kap = 1.0 / (1.0 + lmax);
    for (int k = 0; k < 200; ++k) {
      const Vec p = gaussian_vec(rng, d), q = gaussian_vec(rng, d);
      const Vec tp = dro_bvld_step(losses, amb, eu, whole, p).q;
      const Vec tq = dro_bvld_step(losses, amb, eu, whole, q).q;
      excess = std::max(excess, bregman_div(eu, tp, tq) -
                                    (1.0 - kap) * bregman_div(eu, p, q));
    }
  }
  add_row(rep, "dro.contraction",
          "max D(Tp||Tq) - (1-kappa) D(p||q) for the robust step, 200 pairs",
          excess, 1e-8, excess <= 1e-8);
}

void check_pareto(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 11));
  const int d = 3;
  const Mat a1 = random_spd(rng, d, 1.0, 4.0);
  const Mat a2 = random_spd(rng, d, 2.0, 6.0);
  const Vec m1 = gaussian_vec(rng, d), m2 = gaussian_vec(rng, d);
  std::vector<Objective> objs;
  objs.push_back(Objective::quadratic(a1, a1 * m1));
  objs.push_back(Objective::quadratic(a2, a2 * m2));
  const ParetoProblem pp = ParetoProblem::make(objs);
  const Potential eu = Potential::euclidean(d, 1.0);
  const FeasibleSet whole = FeasibleSet::whole(d);

  std::vector<std::array<double, 2>> front;
  double kkt_max = 0.0;
  bool conv = true;
  for (int i = 0; i <= 20; ++i) {
    Vec w(2);
    w << double(i) / 20.0, 1.0 - double(i) / 20.0;
    Point p = Vec::Zero(d);
    SolveResult last;
    for (int it = 0; it < 400; ++it) {
      last = pareto_bvld_step(pp, w, eu, whole, p);
      const double move = (last.q - p).norm();
      p = last.q;
      if (move <= 1e-12) break;
    }
    conv = conv && last.status == SolveStatus::Converged;
    kkt_max = std::max(kkt_max, last.kkt_residual);
    front.push_back({objs[0].value(p), objs[1].value(p)});
  }
  int dominated = 0;
  for (size_t i = 0; i < front.size(); ++i)
    for (size_t j = 0; j < front.size(); ++j)
      if (i != j && front[j][0] <= front[i][0] - 1e-10 &&
          front[j][1] <= front[i][1] - 1e-10)
        ++dominated;
  add_row(rep, "pareto.nondominance",
          "strictly dominated points on the 21-weight frontier", dominated, 0,
          dominated == 0);
  add_row(rep, "pareto.kkt",
          "max scalarization kkt residual across the frontier", kkt_max, 1e-8,
          conv && kkt_max < 1e-8);
}

void check_bilevel(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 12));
  const int d = 3;
  // Diagonal quadratic keeps the active set certain: coordinates 0 and 2 pin
  // the box, coordinate 1 stays free.
  Mat a = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) a(i, i) = 1.0 + 4.0 * uniform01(rng);
  Vec target(d);
  target << 1.5, 0.2, -1.5;
  const Vec b = a * target;
  const Vec lo = Vec::Constant(d, -0.4), hi = Vec::Constant(d, 0.6);
  const BvldProblem prob =
      BvldProblem::make(Objective::quadratic(a, b), Potential::euclidean(d, 1.0),
                        FeasibleSet::box(lo, hi));
  const Point p = Vec::Constant(d, 0.1);
  const SolveResult r = apply_qn(prob, p);
  const Vec x = gaussian_vec(rng, d);
  const auto upper = [](const Vec& xv, const Point& q) {
    return 0.5 * (xv - q).squaredNorm();
  };
  const BilevelCertificate cert = bilevel_kkt_residual(x, r.q, p, prob, upper);
  add_row(rep, "bilevel.certificate",
          "kkt residual at the lower-level solution (active box bounds)",
          cert.kkt, 1e-8,
          r.status == SolveStatus::Converged && cert.kkt < 1e-8,
          "upper value " + fmt(cert.upper_value));

  int free_i = -1;
  for (int i = 0; i < d; ++i)
    if (r.q[i] > lo[i] + 1e-3 && r.q[i] < hi[i] - 1e-3) {
      free_i = i;
      break;
    }
  double pert = 0.0;
  if (free_i >= 0) {
    Point qp = r.q;
    qp[free_i] += qp[free_i] + 1e-2 < hi[free_i] - 1e-6 ? 1e-2 : -1e-2;
    pert = bilevel_kkt_residual(x, qp, p, prob, upper).kkt;
  }
  add_row(rep, "bilevel.sensitivity",
          "kkt residual after a 1e-2 free-coordinate perturbation", pert,
          1e-4, free_i >= 0 && pert >= 1e-4);
}

void check_determinism(VerifyReport& rep, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 13));
  const int d = 4;
  const Mat a = random_spd(rng, d, 1.0, 8.0);
  const Vec b0 = a * Vec::Ones(d);
  const BvldProblem prob =
      BvldProblem::make(Objective::quadratic(a, b0), Potential::euclidean(d, 1.0),
                        FeasibleSet::whole(d));
  const Point p0 = Vec::Ones(d) + gaussian_vec(rng, d);

  const auto sched = DriftSchedule::random_walk(a, b0, 50,
                                                derive_seed(seed, 13, 2), 0.3, 0.2);
  std::ostringstream s1, s2;
  run_dynamics(sched, prob, p0, SolverChoice::Exact).write_csv(s1);
  run_dynamics(sched, prob, p0, SolverChoice::Exact).write_csv(s2);
  const bool trace_eq = s1.str() == s2.str();
  add_row(rep, "determinism.trace",
          "identical-seed trace CSV mismatch (0 = byte-identical)",
          trace_eq ? 0.0 : 1.0, 0, trace_eq);

  SweepSpec spec;
  spec.env_values = {0.0, 0.3, 0.6};
  spec.obs_values = {0.0, 0.3, 0.6};
  spec.reps = 2;
  spec.horizon = 60;
  spec.master_seed = derive_seed(seed, 13, 3);
  spec.a = a;
  spec.b0 = b0;
  spec.choice = SolverChoice::Exact;
  const auto dump = [](const StabilityMap& m) {
    char buf[64];
    std::string s;
    const auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      s += buf;
    };
    for (const auto& cell : m.cells) {
      put(cell.sigma_env);
      put(cell.sigma_obs);
      put(cell.mean_normalized_regret);
      s += std::to_string(cell.classification);
      s += cell.solver_failed ? ",f;" : ",o;";
    }
    put(m.c1);
    put(m.c2);
    put(m.r2);
    return s;
  };
  const std::string m1 = dump(stability_sweep(spec));
  const std::string m2 = dump(stability_sweep(spec));
  add_row(rep, "determinism.sweep",
          "identical-seed stability map mismatch (0 = byte-identical)",
          m1 == m2 ? 0.0 : 1.0, 0, m1 == m2);
}

double divergence_of(const AmbiguitySet& amb, const Vec& r) {
  double acc = 0.0;
  for (int j = 0; j < amb.atoms(); ++j) {
    const double h = amb.weights[j], x = r[j];
    if (amb.divergence == AmbiguitySet::Divergence::KL) {
      // h phi(x/h) with phi(t) = t log t - t + 1; continuous at x = 0.
      acc += x <= 0.0 ? h : x * std::log(x / h) - x + h;
    } else {
      acc += (x - h) * (x - h) / h;
    }
  }
  return acc;
}

Vec pull_feasible(const AmbiguitySet& amb, Vec r) {
  if (divergence_of(amb, r) <= amb.rho) return r;
  // The divergence grows monotonically along the segment from the nominal,
  // so bisection finds the ball boundary.
  double s_lo = 0.0, s_hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double s = 0.5 * (s_lo + s_hi);
    const Vec cand = amb.weights + s * (r - amb.weights);
    (divergence_of(amb, cand) <= amb.rho ? s_lo : s_hi) = s;
  }
  return amb.weights + s_lo * (r - amb.weights);
}

}  // namespace

double dro_primal_bruteforce(const AmbiguitySet& amb, const Vec& losses,
                             int iters, std::uint64_t seed) {
  if (losses.size() != amb.atoms())
    throw ShapeError("dro_primal_bruteforce: loss count mismatch");
  const int j = amb.atoms();
  const FeasibleSet simplex = FeasibleSet::simplex(j);
  std::mt19937_64 rng(seed);
  const Vec h = amb.weights;
  const double lscale = std::max(1.0, losses.norm());

  double best = losses.dot(h);
  Vec best_r = h;
  const auto consider = [&](const Vec& r) {
    const double v = losses.dot(r);
    if (v > best) {
      best = v;
      best_r = r;
    }
  };
  // Push a candidate to the feasible boundary along its ray from the nominal.
  const auto polish = [&](const Vec& r) {
    const Vec dir = r - h;
    if (dir.norm() <= 1e-15) return;
    const auto feasible_at = [&](double s) {
      const Vec cand = h + s * dir;
      return (cand.array() >= 0.0).all() && divergence_of(amb, cand) <= amb.rho;
    };
    double s_lo = 0.0, s_hi = 1.0;
    for (int k = 0; k < 60 && feasible_at(s_hi); ++k) {
      s_lo = s_hi;
      s_hi *= 2.0;
    }
    for (int k = 0; k < 80; ++k) {
      const double s = 0.5 * (s_lo + s_hi);
      (feasible_at(s) ? s_lo : s_hi) = s;
    }
    consider(h + s_lo * dir);
  };

  // The maximizer of <losses, q> over the divergence ball has a one-parameter
  // tilt form: reweighting the nominal by an exponential tilt (KL) or a
  // clipped affine tilt (chi^2), with the divergence constraint active unless
  // conditioning the nominal on the top-loss atoms already stays inside the
  // ball. Along each family the divergence is monotone in the parameter, so
  // bisection pins the active case to machine precision; the reweighted point
  // taken is always on the feasible side of the bracket.
  int top = 0;
  const double top_loss = losses.maxCoeff(&top);
  const double spread = top_loss - losses.minCoeff();
  const double tie_tol = 1e-12 * std::max(1.0, std::abs(top_loss));
  double top_mass = 0.0;
  for (int i = 0; i < j; ++i)
    if (losses[i] >= top_loss - tie_tol) top_mass += h[i];

  if (amb.divergence == AmbiguitySet::Divergence::KL) {
    if (-std::log(top_mass) <= amb.rho) {
      best = std::max(best, top_loss);
    } else {
      Vec q(j);
      const auto tilt_div = [&](double theta) {
        double z = 0.0;
        for (int i = 0; i < j; ++i) {
          q[i] = h[i] * std::exp(theta * (losses[i] - top_loss));
          z += q[i];
        }
        q /= z;
        double kl = -std::log(z);
        for (int i = 0; i < j; ++i) kl += q[i] * theta * (losses[i] - top_loss);
        return kl;
      };
      double th_lo = 0.0, th_hi = 1.0;
      while (tilt_div(th_hi) < amb.rho && th_hi < 1e12) th_hi *= 2.0;
      for (int k = 0; k < 200; ++k) {
        const double th = 0.5 * (th_lo + th_hi);
        (tilt_div(th) < amb.rho ? th_lo : th_hi) = th;
      }
      tilt_div(th_lo);
      consider(q);
    }
  } else {
    if (1.0 / top_mass - 1.0 <= amb.rho) {
      best = std::max(best, top_loss);
    } else {
      Vec q(j);
      const auto fill = [&](double eta, double nu) {
        double s = 0.0;
        for (int i = 0; i < j; ++i) {
          q[i] = h[i] * std::max(0.0, 1.0 + (losses[i] - eta) / nu);
          s += q[i];
        }
        return s;
      };
      // Inner bisection normalizes the clipped tilt, the outer one activates
      // the divergence constraint.
      const auto at_radius = [&](double nu) {
        double e_lo = losses.minCoeff() - nu, e_hi = top_loss;
        for (int k = 0; k < 200; ++k) {
          const double eta = 0.5 * (e_lo + e_hi);
          (fill(eta, nu) > 1.0 ? e_lo : e_hi) = eta;
        }
        fill(e_lo, nu);
        return divergence_of(amb, q);
      };
      double nu_lo = 1e-14 * std::max(1.0, spread);
      double nu_hi = std::max(1.0, spread);
      while (at_radius(nu_hi) > amb.rho && nu_hi < 1e12) nu_hi *= 2.0;
      for (int k = 0; k < 200; ++k) {
        const double nu = 0.5 * (nu_lo + nu_hi);
        (at_radius(nu) > amb.rho ? nu_lo : nu_hi) = nu;
      }
      at_radius(nu_hi);
      consider(q);
    }
  }

  Vec vertex = Vec::Zero(j);
  vertex[top] = 1.0;
  polish(vertex);
  polish(h + h.cwiseProduct(losses - Vec::Constant(j, losses.dot(h))));

  // Projected ascent from spread starts, feasibility restored by pull-back.
  const int restarts = 24;
  const int per = std::max(50, iters / restarts);
  for (int rs = 0; rs < restarts; ++rs) {
    Vec r;
    if (rs == 0) {
      r = h;
    } else if (rs == 1) {
      r = vertex;
    } else if (rs == 2) {
      r = 0.5 * h;
      r[top] += 0.5;
    } else {
      r = Vec(j);
      for (int i = 0; i < j; ++i) r[i] = -std::log(1.0 - uniform01(rng));
      r /= r.sum();
    }
    r = pull_feasible(amb, simplex.project(r));
    for (int k = 1; k <= per; ++k) {
      const double step = 0.5 / std::sqrt(double(k));
      r = pull_feasible(amb, simplex.project(r + (step / lscale) * losses));
      consider(r);
    }
    polish(r);
  }

  // Fine ascent from the incumbent.
  Vec r = best_r;
  for (int k = 1; k <= 2000; ++k) {
    const double step = 0.1 / double(k);
    r = pull_feasible(amb, simplex.project(r + (step / lscale) * losses));
    consider(r);
  }
  polish(r);
  return best;
}

VerifyReport run_all_checks(std::uint64_t seed) {
  VerifyReport rep;
  check_geometry(rep, seed);
  check_problems(rep, seed);
  check_operator(rep, seed);
  check_solver(rep, seed);
  check_envelope(rep, seed);
  check_rates(rep, seed);
  check_drift(rep, seed);
  check_lyapunov(rep, seed);
  check_flow(rep, seed);
  check_dro(rep, seed);
  check_pareto(rep, seed);
  check_bilevel(rep, seed);
  check_determinism(rep, seed);
  return rep;
}

}  // namespace bvld
