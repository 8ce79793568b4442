#include "bvld/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace bvld {
namespace {

constexpr double kAlphaUnderflow = 1e-16;
constexpr int kMirrorTrialCap = 60;   // mirror-form Armijo rejections before fallback
constexpr int kDenseDimCap = 1000;    // dense BFGS memory guard
// Near a solution the sufficient decrease gamma*m sinks below the rounding
// noise of the objective itself; the acceptance test then switches to a
// midpoint-rule decrease estimate, whose own relative resolution is bounded
// by kSlopeNoise.
constexpr double kValueNoise = 4e-16;
constexpr double kSlopeNoise = 1e-6;
// Headroom on the noise-floor residual gate: a sound full step promises a
// decrease of roughly res^2 / (mu + L), but an imperfect curvature model can
// understate it by a couple of orders of magnitude.
constexpr double kNoiseGateSafety = 100.0;
// Acceptance fraction for the sub-resolution branch. Near a degenerate
// vertex the projected arc is kinked: coordinates cross zero at alpha
// dependent thresholds and part of the promised slope is spent on the kink,
// so the midpoint estimate recovers well under half the promise while the
// step still makes genuine progress. A laxer fraction than the main Armijo
// constant keeps those steps; descent stays certified since the estimate
// must still be strictly negative.
constexpr double kNoiseGamma = 0.1;

Vec subproblem_grad(const BvldProblem& prob, const Point& q,
                    const DualPoint& grad_psi_p) {
  return prob.objective.grad(q) + prob.potential.grad(q) - grad_psi_p;
}

}  // namespace

void SolveOptions::validate() const {
  if (!(tol_stationarity > 0.0))
    throw ConfigError("solver.tol_stationarity", "must be positive");
  if (!(tol_step > 0.0)) throw ConfigError("solver.tol_step", "must be positive");
  if (max_inner_iters <= 0)
    throw ConfigError("solver.max_inner_iters", "must be positive");
  if (!(armijo_gamma > 0.0 && armijo_gamma < 1.0))
    throw ConfigError("solver.armijo_gamma", "must lie in (0, 1)");
  if (!(armijo_beta > 0.0 && armijo_beta < 1.0))
    throw ConfigError("solver.armijo_beta", "must lie in (0, 1)");
  if (delta0 < 0.0) throw ConfigError("solver.delta0", "must be nonnegative");
  if (!(delta_rate > 0.0 && delta_rate <= 1.0))
    throw ConfigError("solver.delta_rate", "must lie in (0, 1]");
}

double bvld_objective(const BvldProblem& prob, const Point& q, const Point& p) {
  return prob.objective.value(q) + bregman_div(prob.potential, q, p);
}

Point bregman_project(const Potential& psi, const FeasibleSet& set,
                      const Point& x) {
  if (set.kind() == FeasibleSet::Kind::Whole) return x;
  switch (psi.kind()) {
    case Potential::Kind::Euclidean:
      return set.project(x);
    case Potential::Kind::NegativeEntropy: {
      if (!(x.array() > 0.0).all())
        throw DomainError("bregman_project: point left the positive orthant");
      if (set.kind() == FeasibleSet::Kind::Simplex) return x / x.sum();
      // Box: the divergence is separable and monotone per coordinate, so the
      // projection is a clamp (lower bounds must stay positive).
      Vec lo = set.lower().cwiseMax(1e-300);
      return x.cwiseMax(lo).cwiseMin(set.upper());
    }
    case Potential::Kind::Custom: {
      Vec v = set.project(x);
      if (!psi.in_domain(v))
        throw DomainError(
            "bregman_project: Euclidean projection left the potential domain");
      return v;
    }
  }
  return x;
}

namespace {

SolveResult finish(const BvldProblem& prob, const Point& p, Point q,
                   int iters, SolveStatus status, const SolveOptions& opts) {
  SolveResult r;
  r.q = std::move(q);
  r.next_p = r.q;
  r.mirror_residual = prob.potential.grad(p) - prob.potential.grad(r.q);
  r.kkt_residual = kkt_residual(prob, p, r.q);
  r.objective_value = bvld_objective(prob, r.q, p);
  r.inner_iters = iters;
  if (status != SolveStatus::DomainFailure)
    status = r.kkt_residual <= opts.tol_stationarity ? SolveStatus::Converged
                                                     : SolveStatus::MaxIters;
  r.status = status;
  return r;
}

}  // namespace

SolveResult apply_qn(const BvldProblem& prob, const Point& p,
                     const SolveOptions& opts) {
  opts.validate();
  prob.potential.require_domain(p, "apply_qn(p)");
  if (!prob.feasible.contains(p, 1e-9))
    throw DomainError("apply_qn: anchor p is infeasible");
  const int d = prob.potential.dim();
  if (d > kDenseDimCap)
    throw ShapeError("apply_qn: dense quasi-Newton memory is limited to "
                     "dimension " + std::to_string(kDenseDimCap));

  const DualPoint grad_psi_p = prob.potential.grad(p);
  Point q = p;
  Vec g = subproblem_grad(prob, q, grad_psi_p);
  double res = prob.feasible.stationarity_residual(q, g);
  if (res <= opts.tol_stationarity)
    return finish(prob, p, std::move(q), 0, SolveStatus::Converged, opts);

  Mat h = Mat::Identity(d, d);
  bool h_plain = true;  // no curvature absorbed yet
  double phi = bvld_objective(prob, q, p);
  SolveStatus status = SolveStatus::MaxIters;
  int iters = 0;
  bool any_in_domain = false;

  // On the simplex the mirror coordinate is only defined modulo constants
  // (the normal cone absorbs them), so the curvature model lives on the
  // quotient: strip the mean from gradients and update pairs.
  const bool on_simplex = prob.feasible.kind() == FeasibleSet::Kind::Simplex;
  const auto reduce = [d, on_simplex](Vec v) {
    if (on_simplex) v.array() -= v.sum() / double(d);
    return v;
  };

  // mu + L recovered from kappa = mu / (mu + L); sets the scale at which a
  // sub-noise decrease promise is consistent with genuine near-stationarity.
  const double curvature_sum =
      prob.kappa > 0.0 ? prob.potential.mu() / prob.kappa : 1.0;

  // Directional derivative of Phi along the arc displacement. On the simplex
  // the displacement sums to zero, so any constant may be subtracted from the
  // gradient without changing the value in exact arithmetic; subtracting the
  // mean over the moving coordinates minimizes the magnitude of the products,
  // which keeps the rounding error of the sum far below the tiny slopes the
  // line search has to compare near the noise floor.
  const auto arc_slope = [on_simplex, d](const Vec& grad_vec,
                                         const Vec& delta) {
    if (!on_simplex) return grad_vec.dot(delta);
    double c = 0.0;
    int moving = 0;
    for (int i = 0; i < d; ++i) {
      if (delta[i] != 0.0) {
        c += grad_vec[i];
        ++moving;
      }
    }
    if (moving > 0) c /= double(moving);
    double slope = 0.0;
    for (int i = 0; i < d; ++i) slope += (grad_vec[i] - c) * delta[i];
    return slope;
  };

  Vec gr = reduce(g);
  for (int k = 0; k < opts.max_inner_iters; ++k) {
    iters = k + 1;
    const DualPoint mirror_q = prob.potential.grad(q);

    // Backtracking along the projected mirror arc. The sufficient-decrease
    // model gamma * <g, trial - q> follows the arc, so clipping at the
    // feasible boundary shrinks the promised decrease together with the
    // achievable one.
    const auto line_search = [&](const Vec& dir, Point& out,
                                 double& phi_out) -> bool {
      double alpha = 1.0;
      while (alpha >= kAlphaUnderflow) {
        bool in_domain = true;
        Point trial;
        try {
          Point raw = prob.potential.grad_inv(mirror_q + alpha * dir);
          trial = bregman_project(prob.potential, prob.feasible, raw);
          in_domain = prob.potential.in_domain(trial);
        } catch (const DomainError&) {
          in_domain = false;
        }
        if (in_domain) {
          any_in_domain = true;
          const Vec delta = trial - q;
          const double m = arc_slope(g, delta);
          const double allowance = kValueNoise * (1.0 + std::abs(phi));
          if (m < 0.0) {
            if (opts.armijo_gamma * (-m) > allowance) {
              const double phi_trial = bvld_objective(prob, trial, p);
              if (phi_trial <= phi + opts.armijo_gamma * m) {
                out = std::move(trial);
                phi_out = phi_trial;
                return true;
              }
            } else if (res * res * opts.armijo_gamma <=
                       kNoiseGateSafety * allowance * curvature_sum) {
              // The promised decrease fell below the value resolution, so
              // comparing objective values can no longer discriminate.
              // Near stationarity that is expected: a full step of a sound
              // model promises about res^2 / (mu + L), which sinks below the
              // rounding noise of the objective while res is still well above
              // the stationarity tolerance. In that regime, estimate the
              // decrease by the midpoint rule: it is exact for quadratics
              // and, being a product of two small quantities, does not suffer
              // the cancellation that kills the direct difference. The
              // residual gate keeps this path honest: a sub-noise promise
              // while res is far from the floor means the direction is bad,
              // and the search must fail so the curvature model is rebuilt.
              const Point mid = 0.5 * (q + trial);
              const double dphi =
                  arc_slope(subproblem_grad(prob, mid, grad_psi_p), delta);
              const double gamma_n = std::min(opts.armijo_gamma, kNoiseGamma);
              if (dphi <= gamma_n * m + kSlopeNoise * (-m)) {
                phi_out = bvld_objective(prob, trial, p);
                out = std::move(trial);
                return true;
              }
            }
          }
        }
        alpha *= opts.armijo_beta;
      }
      return false;
    };

    Point next;
    double phi_next = 0.0;
    bool moved = line_search(-(h * gr), next, phi_next);
    if (!moved && !h_plain) {
      h.setIdentity();  // curvature model went bad; restart from steepest descent
      h_plain = true;
      moved = line_search(-gr, next, phi_next);
    }
    if (!moved) {
      if (!any_in_domain) status = SolveStatus::DomainFailure;
      break;
    }

    const Vec g_new = subproblem_grad(prob, next, grad_psi_p);
    const Vec s = reduce(prob.potential.grad(next) - mirror_q);
    const Vec gr_new = reduce(g_new);
    const Vec y = gr_new - gr;
    const double ys = y.dot(s);
    if (ys > opts.curvature_guard) {
      if (h_plain) {
        h *= ys / y.squaredNorm();  // scale the seed to the observed curvature
        h_plain = false;
      }
      // Inverse BFGS update in mirror coordinates.
      const Vec hy = h * y;
      const double yhy = y.dot(hy);
      h += ((ys + yhy) / (ys * ys)) * (s * s.transpose());
      const Mat cross = hy * s.transpose();
      h -= (cross + cross.transpose()) / ys;
    }

    const double step = (next - q).norm();
    q = next;
    g = g_new;
    gr = gr_new;
    phi = phi_next;
    res = prob.feasible.stationarity_residual(q, g);
    if (res <= opts.tol_stationarity) {
      status = SolveStatus::Converged;
      break;
    }
    if (step <= opts.tol_step) {
      // A vanishing step under a live curvature model means the model went
      // degenerate (boundary-clipped pairs), not that we are stationary;
      // discard it and continue from steepest descent.
      if (h_plain) break;
      h.setIdentity();
      h_plain = true;
    }
  }

  return finish(prob, p, std::move(q), iters, status, opts);
}

SolveResult apply_exact(const BvldProblem& prob, const Point& p,
                        const SolveOptions& opts) {
  opts.validate();
  const bool closed_form =
      prob.potential.kind() == Potential::Kind::Euclidean &&
      prob.objective.kind() == Objective::Kind::Quadratic &&
      prob.feasible.kind() == FeasibleSet::Kind::Whole;
  if (!closed_form) return apply_qn(prob, p, opts);

  prob.potential.require_domain(p, "apply_exact(p)");
  // Stationarity: A q - b + mu (q - p) = 0.
  const double mu = prob.potential.mu();
  Mat m = prob.objective.quad_matrix();
  m.diagonal().array() += mu;
  const Point q = m.ldlt().solve(mu * p + prob.objective.linear_term());
  SolveResult r = finish(prob, p, q, 0, SolveStatus::Converged, opts);
  if (r.status != SolveStatus::Converged) {
    // Ill-conditioned closed form; polish with the iterative solver.
    SolveResult polished = apply_qn(prob, p, opts);
    if (polished.kkt_residual < r.kkt_residual) return polished;
  }
  return r;
}

SolveResult apply_inexact(const BvldProblem& prob, const Point& p, int t,
                          const SolveOptions& opts) {
  opts.validate();
  if (t < 0) throw ConfigError("solver.t", "outer index must be nonnegative");
  prob.potential.require_domain(p, "apply_inexact(p)");

  const double delta_t = opts.delta0 * std::pow(opts.delta_rate, double(t));
  // The proximal objective is at least mu-strongly convex, so a stationarity
  // residual of sqrt(2 mu delta) certifies a value gap below delta.
  SolveOptions inner = opts;
  if (delta_t > 0.0) {
    const double tol_from_gap =
        0.9 * std::sqrt(2.0 * prob.potential.mu() * delta_t);
    inner.tol_stationarity = std::max(opts.tol_stationarity, tol_from_gap);
  }
  SolveResult sub = prob.potential.kind() == Potential::Kind::Euclidean &&
                            prob.objective.kind() == Objective::Kind::Quadratic &&
                            prob.feasible.kind() == FeasibleSet::Kind::Whole
                        ? apply_exact(prob, p, inner)
                        : apply_qn(prob, p, inner);
  if (sub.status == SolveStatus::DomainFailure) return sub;

  const DualPoint mirror_p = prob.potential.grad(p);
  const DualPoint mirror_q = prob.potential.grad(sub.q);
  const Vec h = mirror_q - mirror_p;  // mirror displacement toward q
  const double msq = h.squaredNorm();
  const double phi_q = sub.objective_value;
  const double phi_p = prob.objective.value(p);  // Phi(p; p) = f(p)

  auto trial_at = [&](double alpha, Point& out) -> bool {
    try {
      Point raw = prob.potential.grad_inv(mirror_p + alpha * h);
      out = bregman_project(prob.potential, prob.feasible, raw);
      return prob.potential.in_domain(out);
    } catch (const DomainError&) {
      return false;
    }
  };

  double alpha = 1.0;
  Point accepted;
  bool have_accept = false;
  bool fallback = false;

  // Relaxation test comparing the trial against the subproblem value minus a
  // mirror-gradient quadratic. It is exact at a fixed point (both sides
  // coincide) and intentionally strict elsewhere.
  int trials = 0;
  while (trials < kMirrorTrialCap && alpha >= kAlphaUnderflow) {
    Point cand;
    if (trial_at(alpha, cand) &&
        bvld_objective(prob, cand, p) <= phi_q - 0.5 * alpha * msq) {
      accepted = std::move(cand);
      have_accept = true;
      break;
    }
    alpha *= opts.armijo_beta;
    ++trials;
  }

  if (!have_accept) {
    // Documented fallback: classical sufficient decrease of the proximal
    // value relative to the anchor p.
    fallback = true;
    alpha = 1.0;
    const double drop = std::max(0.0, phi_p - phi_q);
    while (true) {
      Point cand;
      if (trial_at(alpha, cand) &&
          bvld_objective(prob, cand, p) <=
              phi_p - opts.armijo_gamma * alpha * drop) {
        accepted = std::move(cand);
        have_accept = true;
        break;
      }
      alpha *= opts.armijo_beta;
      if (alpha < kAlphaUnderflow)
        throw LineSearchFailure(
            "apply_inexact: relaxation step underflowed below 1e-16; "
            "gradients are inconsistent");
    }
  }

  SolveResult r = sub;
  r.next_p = accepted;
  r.alpha = alpha;
  r.armijo_fallback = fallback;
  return r;
}

}  // namespace bvld
