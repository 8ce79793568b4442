#include "bvld/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bvld {
namespace {

constexpr double kGapFloor = 1e-14;   // numerically-zero gap
constexpr int kMinFitPoints = 10;
constexpr double kR2Margin = 0.05;

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool degenerate = false;  // zero variance in y
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / double(n), my = sy / double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  if (syy <= 1e-30 || sxx <= 1e-30) {
    f.degenerate = true;
    f.slope = 0.0;
    f.intercept = my;
    f.r2 = 0.0;
    return f;
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssres = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ssres += r * r;
  }
  f.r2 = 1.0 - ssres / syy;
  return f;
}

// Fixed point of the proximal operator: the objective's own minimizer when
// it is feasible, otherwise iterate the operator to convergence.
Point fixed_point(const BvldProblem& prob, const Point& start,
                  const SolveOptions& opts) {
  if (prob.objective.minimizer() &&
      prob.feasible.kind() == FeasibleSet::Kind::Whole &&
      prob.potential.in_domain(*prob.objective.minimizer()))
    return *prob.objective.minimizer();
  Point p = start;
  for (int k = 0; k < 20000; ++k) {
    const SolveResult r = apply_exact(prob, p, opts);
    const double move = (r.q - p).norm();
    p = r.q;
    if (move <= 1e-12 * std::max(1.0, p.norm())) return p;
  }
  throw NoValidSamples(
      "pl_constant_probe: fixed-point iteration failed to converge");
}

}  // namespace

EnvelopeEval envelope_eval(const BvldProblem& prob, const Point& p,
                           const SolveOptions& opts) {
  const SolveResult r = apply_exact(prob, p, opts);
  EnvelopeEval e;
  e.value = r.objective_value;
  e.argmin = r.q;
  e.mirror_grad = prob.potential.grad(p) - prob.potential.grad(r.q);
  return e;
}

double dual_gap(const BvldProblem& prob, const Point& p,
                const SolveOptions& opts) {
  const auto pk = prob.potential.kind();
  const auto fk = prob.objective.kind();
  const auto sk = prob.feasible.kind();

  const EnvelopeEval e = envelope_eval(prob, p, opts);
  const DualPoint u = prob.potential.grad(p);
  const Vec y = e.mirror_grad;

  if (pk == Potential::Kind::Euclidean && fk == Objective::Kind::Quadratic &&
      sk == FeasibleSet::Kind::Whole) {
    if (!prob.objective.quad_invertible())
      throw ConjugateUnavailable(
          "dual_gap: quadratic conjugate needs a nonsingular A");
    const Vec& b = prob.objective.linear_term();
    const double mu = prob.potential.mu();
    // f*(y) = 1/2 (y+b)' A^-1 (y+b);  psi*(u) = |u|^2 / (2 mu).
    const double f_star = 0.5 * (y + b).dot(prob.objective.quad_solve(y + b));
    const double dual = -f_star - (u - y).squaredNorm() / (2.0 * mu) +
                        u.squaredNorm() / (2.0 * mu);
    return e.value - dual;
  }

  if (pk == Potential::Kind::NegativeEntropy &&
      fk == Objective::Kind::Linear && sk == FeasibleSet::Kind::Simplex) {
    const Vec& c = prob.objective.linear_term();
    // Simplex-restricted conjugates: f*(y) = max_i (y_i - c_i) and
    // psi*(u) = log sum_i exp(u_i).
    auto lse = [](const Vec& v) {
      const double m = v.maxCoeff();
      return m + std::log((v.array() - m).exp().sum());
    };
    const double f_star = (y - c).maxCoeff();
    const double dual = -f_star - lse(u - y) + lse(u);
    return e.value - dual;
  }

  throw ConjugateUnavailable(
      "dual_gap: no closed-form conjugate pairing for this problem");
}

RateEstimate estimate_rate(const std::vector<double>& gaps) {
  // Usable prefix: positive finite gaps before the first numerical zero.
  std::vector<double> f;
  bool hit_floor = false;
  for (double g : gaps) {
    if (!std::isfinite(g)) break;
    if (g <= kGapFloor) {
      hit_floor = true;
      break;
    }
    f.push_back(g);
  }

  RateEstimate est;
  est.usable = int(f.size());
  if (hit_floor && int(f.size()) < kMinFitPoints) {
    est.regime = RateRegime::Finite;
    est.theta_hat = 0.0;
    est.rho_hat = 1.0 - std::numeric_limits<double>::epsilon();
    est.fit_r2 = 1.0;
    return est;
  }
  if (int(f.size()) < kMinFitPoints)
    throw InsufficientData("estimate_rate: fewer than 10 usable gaps");

  std::vector<double> ks, logks, logf, logf_tail;
  for (size_t k = 0; k < f.size(); ++k) {
    ks.push_back(double(k));
    logf.push_back(std::log(f[k]));
    if (k >= 1) {
      logks.push_back(std::log(double(k)));
      logf_tail.push_back(std::log(f[k]));
    }
  }
  const LineFit lin = fit_line(ks, logf);
  const LineFit pow = fit_line(logks, logf_tail);

  est.slope = lin.slope;
  est.sublinear_exponent = pow.slope;

  const bool linear_decays = lin.slope < -1e-12;
  const bool pick_linear =
      linear_decays && (lin.r2 >= pow.r2 - kR2Margin);
  if (pick_linear) {
    est.regime = RateRegime::Linear;
    est.rho_hat = 1.0 - std::exp(lin.slope);
    est.theta_hat = 0.5;  // canonical exponent for geometric decay
    est.fit_r2 = lin.r2;
  } else {
    est.regime = RateRegime::Sublinear;
    est.rho_hat = 0.0;
    est.fit_r2 = pow.r2;
    // Map the power-law exponent e (F_k ~ k^e, e < 0) to the dominance
    // exponent via e = -1 / (2 theta - 1).
    const double e = std::min(pow.slope, -1e-6);
    est.theta_hat = std::clamp(0.5 * (1.0 + 1.0 / -e), 0.5 + 1e-6, 0.999);
  }
  return est;
}

double pl_constant_probe(const BvldProblem& prob,
                         const std::vector<Point>& samples,
                         const SolveOptions& opts) {
  if (samples.empty())
    throw NoValidSamples("pl_constant_probe: no samples supplied");
  const Point pstar = fixed_point(prob, samples.front(), opts);
  const double e_star = bvld_objective(prob, pstar, pstar);

  double lambda = std::numeric_limits<double>::infinity();
  int used = 0;
  for (const Point& p : samples) {
    const EnvelopeEval e = envelope_eval(prob, p, opts);
    const double gap = e.value - e_star;
    if (gap < 1e-12) continue;  // degenerate ratio at near-optimal samples
    ++used;
    lambda = std::min(lambda, 0.5 * e.mirror_grad.squaredNorm() / gap);
  }
  if (used == 0)
    throw NoValidSamples(
        "pl_constant_probe: every sample had a gap below 1e-12");
  return lambda;
}

}  // namespace bvld
