#include "bvld/extensions.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bvld {
namespace {

constexpr double kLambdaFloor = 1e-8;
constexpr int kGoldenIters = 220;
constexpr double kGoldenRatio = 0.6180339887498949;

// Conjugates of the generators phi(r) = r log r - r + 1 and (r - 1)^2.
double phi_star(AmbiguitySet::Divergence div, double s) {
  if (div == AmbiguitySet::Divergence::KL) return std::expm1(s);
  return s >= -2.0 ? s + 0.25 * s * s : -1.0;
}

double phi_star_prime(AmbiguitySet::Divergence div, double s) {
  if (div == AmbiguitySet::Divergence::KL) return std::exp(s);
  return s >= -2.0 ? 1.0 + 0.5 * s : 0.0;
}

// Inner dual objective h(eta) = eta + lambda sum_j h_j phi*((l_j - eta)/lambda),
// convex in eta with h'(eta) = 1 - sum_j h_j phi*'((l_j - eta)/lambda).
double inner_slope(const AmbiguitySet& amb, const Vec& losses, double lambda,
                   double eta) {
  double s = 0.0;
  for (int j = 0; j < amb.atoms(); ++j)
    s += amb.weights[j] *
         phi_star_prime(amb.divergence, (losses[j] - eta) / lambda);
  return 1.0 - s;
}

double inner_value(const AmbiguitySet& amb, const Vec& losses, double lambda,
                   double eta) {
  double s = 0.0;
  for (int j = 0; j < amb.atoms(); ++j)
    s += amb.weights[j] * phi_star(amb.divergence, (losses[j] - eta) / lambda);
  return eta + lambda * s;
}

// Stable eta* = lambda log sum_j h_j exp(l_j / lambda) for the KL generator.
double kl_eta_closed_form(const AmbiguitySet& amb, const Vec& losses,
                          double lambda) {
  const double top = losses.maxCoeff();
  double s = 0.0;
  for (int j = 0; j < amb.atoms(); ++j)
    s += amb.weights[j] * std::exp((losses[j] - top) / lambda);
  return top + lambda * std::log(s);
}

// Root of the increasing slope h'(eta) by Newton steps inside a maintained
// bracket, falling back to bisection whenever a step leaves it.
double solve_inner_eta(const AmbiguitySet& amb, const Vec& losses,
                       double lambda) {
  const double top = losses.maxCoeff();
  const double bottom = losses.minCoeff();
  const double hmin = amb.weights.minCoeff() > 0.0 ? amb.weights.minCoeff()
                                                   : 1e-18;
  double lo, hi = top;
  if (amb.divergence == AmbiguitySet::Divergence::KL)
    lo = top - lambda * (std::log(1.0 / hmin) + 1.0);
  else
    lo = bottom - 4.0 * lambda;
  // h' >= 0 at hi and <= 0 at lo by construction; widen defensively if the
  // arithmetic disagrees.
  for (int k = 0; k < 64 && inner_slope(amb, losses, lambda, lo) > 0.0; ++k)
    lo -= std::max(1.0, hi - lo);

  double eta = 0.5 * (lo + hi);
  for (int k = 0; k < 200; ++k) {
    const double g = inner_slope(amb, losses, lambda, eta);
    if (g > 0.0)
      hi = eta;
    else
      lo = eta;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) break;
    // Curvature of h at eta for the Newton proposal.
    double curv = 0.0;
    for (int j = 0; j < amb.atoms(); ++j) {
      const double s = (losses[j] - eta) / lambda;
      if (amb.divergence == AmbiguitySet::Divergence::KL)
        curv += amb.weights[j] * std::exp(s) / lambda;
      else if (s >= -2.0)
        curv += amb.weights[j] * 0.5 / lambda;
    }
    double next = curv > 0.0 ? eta - g / curv : eta;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    eta = next;
  }
  return eta;
}

Vec worst_case_weights(const AmbiguitySet& amb, const Vec& losses,
                       double lambda, double eta) {
  Vec r(amb.atoms());
  for (int j = 0; j < amb.atoms(); ++j)
    r[j] = amb.weights[j] *
           phi_star_prime(amb.divergence, (losses[j] - eta) / lambda);
  return r;
}

double golden_min(const std::function<double(double)>& g, double lo, double hi,
                  double* arg) {
  double a = lo, b = hi;
  double x1 = b - kGoldenRatio * (b - a);
  double x2 = a + kGoldenRatio * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int k = 0; k < kGoldenIters; ++k) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGoldenRatio * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGoldenRatio * (b - a);
      f2 = g(x2);
    }
  }
  *arg = f1 <= f2 ? x1 : x2;
  return std::min(f1, f2);
}

}  // namespace

AmbiguitySet AmbiguitySet::make(Divergence divergence, double rho,
                                Vec weights) {
  if (weights.size() < 1 || weights.size() > 64)
    throw WeightError("AmbiguitySet: need between 1 and 64 atoms, got " +
                      std::to_string(weights.size()));
  if (weights.minCoeff() < 0.0)
    throw WeightError("AmbiguitySet: nominal weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw WeightError("AmbiguitySet: nominal weights must sum to 1");
  if (!(rho > 0.0)) throw ConfigError("ambiguity.rho", "must be positive");
  AmbiguitySet amb;
  amb.divergence = divergence;
  amb.rho = rho;
  amb.weights = std::move(weights);
  return amb;
}

double dro_dual_profile(const AmbiguitySet& amb, const Vec& losses,
                        double lambda, bool generic_inner) {
  if (losses.size() != amb.weights.size())
    throw ShapeError("dro_dual_profile: losses do not match the atom count");
  if (!(lambda > 0.0))
    throw ConfigError("dro.lambda", "must be positive");
  double eta;
  if (!generic_inner && amb.divergence == AmbiguitySet::Divergence::KL) {
    eta = kl_eta_closed_form(amb, losses, lambda);
    // At the KL stationary point the phi* sum telescopes to zero exactly.
    return lambda * amb.rho + eta;
  }
  eta = solve_inner_eta(amb, losses, lambda);
  return lambda * amb.rho + inner_value(amb, losses, lambda, eta);
}

DroDual dro_envelope(const AmbiguitySet& amb, const Vec& losses) {
  if (losses.size() != amb.weights.size())
    throw ShapeError("dro_envelope: losses do not match the atom count");
  for (int j = 0; j < losses.size(); ++j)
    if (!std::isfinite(losses[j]))
      throw DomainError("dro_envelope: loss values must be finite");

  const double spread = losses.maxCoeff() - losses.minCoeff();
  auto g = [&](double lambda) {
    return dro_dual_profile(amb, losses, lambda, false);
  };

  double lambda_max =
      std::max({1.0, 2.0 * spread / amb.rho + 1.0,
                2.0 * spread / std::sqrt(amb.rho) + 1.0});
  double lambda_star = 0.0;
  double value = 0.0;
  for (int attempt = 0;; ++attempt) {
    value = golden_min(g, kLambdaFloor, lambda_max, &lambda_star);
    if (lambda_star < 0.99 * lambda_max) break;
    if (attempt == 1)
      throw BracketError("dro_envelope: dual minimizer escaped the bracket [" +
                         std::to_string(kLambdaFloor) + ", " +
                         std::to_string(lambda_max) + "]");
    lambda_max *= 10.0;
  }

  DroDual out;
  out.value = value;
  out.lambda_star = lambda_star;
  out.eta_star =
      amb.divergence == AmbiguitySet::Divergence::KL
          ? kl_eta_closed_form(amb, losses, lambda_star)
          : solve_inner_eta(amb, losses, lambda_star);
  out.worst_weights =
      worst_case_weights(amb, losses, lambda_star, out.eta_star);
  return out;
}

SolveResult dro_bvld_step(const std::vector<Objective>& atom_losses,
                          const AmbiguitySet& amb, const Potential& potential,
                          const FeasibleSet& feasible, const Point& p,
                          const SolveOptions& opts) {
  if (int(atom_losses.size()) != amb.atoms())
    throw ShapeError("dro_bvld_step: atom losses do not match the weights");
  const int d = atom_losses.front().dim();
  double l_max = 0.0;
  for (const auto& f : atom_losses) {
    if (f.dim() != d)
      throw ShapeError("dro_bvld_step: atom losses live on different spaces");
    l_max = std::max(l_max, f.lipschitz());
  }

  auto losses_at = [&, atoms = amb.atoms()](const Vec& q) {
    Vec l(atoms);
    for (int j = 0; j < atoms; ++j) l[j] = atom_losses[size_t(j)].value(q);
    return l;
  };

  Objective::CustomSpec spec;
  spec.dim = d;
  spec.lipschitz = l_max;
  spec.value = [&amb, losses_at](const Vec& q) {
    return dro_envelope(amb, losses_at(q)).value;
  };
  spec.grad = [&amb, &atom_losses, losses_at](const Vec& q) {
    const DroDual dual = dro_envelope(amb, losses_at(q));
    Vec g = Vec::Zero(q.size());
    for (int j = 0; j < amb.atoms(); ++j)
      g += dual.worst_weights[j] * atom_losses[size_t(j)].grad(q);
    return g;
  };
  spec.verify = false;  // the mixture pair is exact by construction

  const BvldProblem prob =
      BvldProblem::make(Objective::custom(std::move(spec)), potential,
                        feasible);
  return apply_qn(prob, p, opts);
}

ParetoProblem ParetoProblem::make(std::vector<Objective> objectives) {
  if (objectives.empty() || objectives.size() > 8)
    throw ShapeError("ParetoProblem: need between 1 and 8 objectives, got " +
                     std::to_string(objectives.size()));
  const int d = objectives.front().dim();
  double l_max = 0.0;
  for (const auto& f : objectives) {
    if (f.dim() != d)
      throw ShapeError("ParetoProblem: objectives live on different spaces");
    l_max = std::max(l_max, f.lipschitz());
  }
  ParetoProblem pp;
  pp.objectives = std::move(objectives);
  pp.l_max = l_max;
  return pp;
}

SolveResult pareto_bvld_step(const ParetoProblem& pp, const Vec& w,
                             const Potential& potential,
                             const FeasibleSet& feasible, const Point& p,
                             const SolveOptions& opts) {
  if (w.size() != pp.size())
    throw WeightError("pareto_bvld_step: weight count " +
                      std::to_string(w.size()) + " does not match " +
                      std::to_string(pp.size()) + " objectives");
  if (w.minCoeff() < -1e-10 || std::abs(w.sum() - 1.0) > 1e-10)
    throw WeightError("pareto_bvld_step: weights must lie on the simplex");

  bool all_quadratic = true;
  for (const auto& f : pp.objectives)
    if (f.kind() != Objective::Kind::Quadratic) all_quadratic = false;

  Objective scalarized = [&]() {
    if (all_quadratic) {
      Mat a = Mat::Zero(pp.dim(), pp.dim());
      Vec b = Vec::Zero(pp.dim());
      for (int i = 0; i < pp.size(); ++i) {
        a += std::max(0.0, w[i]) * pp.objectives[size_t(i)].quad_matrix();
        b += std::max(0.0, w[i]) * pp.objectives[size_t(i)].linear_term();
      }
      return Objective::quadratic(std::move(a), std::move(b));
    }
    Objective::CustomSpec spec;
    spec.dim = pp.dim();
    spec.lipschitz = pp.l_max;
    spec.value = [&pp, w](const Vec& q) {
      double v = 0.0;
      for (int i = 0; i < pp.size(); ++i)
        v += w[i] * pp.objectives[size_t(i)].value(q);
      return v;
    };
    spec.grad = [&pp, w](const Vec& q) {
      Vec g = Vec::Zero(q.size());
      for (int i = 0; i < pp.size(); ++i)
        g += w[i] * pp.objectives[size_t(i)].grad(q);
      return g;
    };
    spec.verify = false;  // components are verified individually
    return Objective::custom(std::move(spec));
  }();

  // kappa must reflect L_max of the family, not the weighted instance, so
  // the contraction constant quoted for one step holds across all weights.
  BvldProblem prob = BvldProblem::make(std::move(scalarized), potential,
                                       feasible);
  prob.kappa = potential.mu() / (potential.mu() + pp.l_max);
  return apply_qn(prob, p, opts);
}

BilevelCertificate bilevel_kkt_residual(
    const Vec& x, const Point& q, const Point& p, const BvldProblem& prob,
    const std::function<double(const Vec&, const Point&)>& upper) {
  BilevelCertificate cert;
  cert.kkt = kkt_residual(prob, p, q);
  cert.upper_value = upper ? upper(x, q) : 0.0;
  return cert;
}

}  // namespace bvld
