#pragma once

// Robust, multiobjective and bilevel layers over the core proximal step:
// phi-divergence DRO via its 1-D dual, weighted-sum Pareto scalarization,
// and the single-level KKT certificate for bilevel designs.

#include <functional>
#include <vector>

#include "bvld/solver.hpp"

namespace bvld {

// Discrete ambiguity ball: distributions within phi-divergence rho of the
// nominal weights. Losses are indexed per atom, so the set only stores the
// nominal weights themselves.
struct AmbiguitySet {
  enum class Divergence { KL, ChiSquared };

  Divergence divergence = Divergence::KL;
  double rho = 0.0;
  Vec weights;

  // Validates: 1 <= J <= 64 atoms, weights nonnegative summing to 1 within
  // 1e-12 (WeightError), rho > 0 (ConfigError).
  static AmbiguitySet make(Divergence divergence, double rho, Vec weights);

  int atoms() const { return int(weights.size()); }
};

struct DroDual {
  double value = 0.0;        // robust expectation sup over the ball
  double lambda_star = 0.0;  // multiplier of the divergence constraint
  double eta_star = 0.0;     // inner translation variable
  Vec worst_weights;         // adversarial reweighting h_j phi*'((l_j-eta)/lambda)
};

// Dual objective G(lambda) = lambda rho + eta* + lambda sum_j h_j
// phi*((l_j - eta*) / lambda) at the inner-optimal eta*. The generic path
// locates eta* by safeguarded Newton on the stationarity condition; without
// it KL uses the closed form eta* = lambda log sum_j h_j exp(l_j / lambda).
double dro_dual_profile(const AmbiguitySet& amb, const Vec& losses,
                        double lambda, bool generic_inner = false);

// Minimizes G over lambda in [1e-8, lambda_max] by golden section; the
// bracket is expanded once by 10x if the minimizer pins the upper end,
// then BracketError.
DroDual dro_envelope(const AmbiguitySet& amb, const Vec& losses);

// One robust proximal step
//   argmin_q { sup_{r in ball} sum_j r_j l_j(q) + D_psi(q || p) }
// via the quasi-Newton solver; the envelope gradient at q is the Danskin
// mixture sum_j r*_j grad l_j(q) at the worst-case reweighting. The
// smoothness constant handed to the solver is max_j L_j.
SolveResult dro_bvld_step(const std::vector<Objective>& atom_losses,
                          const AmbiguitySet& amb, const Potential& potential,
                          const FeasibleSet& feasible, const Point& p,
                          const SolveOptions& opts = {});

// Up to 8 objectives on a shared space; kappa of a scalarized step is
// mu / (mu + L_max) with L_max the largest per-objective constant.
struct ParetoProblem {
  std::vector<Objective> objectives;
  double l_max = 0.0;

  static ParetoProblem make(std::vector<Objective> objectives);
  int dim() const { return objectives.front().dim(); }
  int size() const { return int(objectives.size()); }
};

// Weighted-sum scalarization step via the quasi-Newton solver. When every
// objective is quadratic the weighted sum is assembled exactly as one
// quadratic. WeightError if w is off the simplex by more than 1e-10.
SolveResult pareto_bvld_step(const ParetoProblem& pp, const Vec& w,
                             const Potential& potential,
                             const FeasibleSet& feasible, const Point& p,
                             const SolveOptions& opts = {});

struct BilevelCertificate {
  double kkt = 0.0;          // lower-level stationarity residual at (p, q)
  double upper_value = 0.0;  // caller's upper objective at (x, q)
};

// Feasibility certificate for the single-level reformulation: the residual
// of 0 in grad f(q) + grad psi(q) - grad psi(p) + N(q) at the candidate
// lower solution q, with the upper objective evaluated alongside. No upper-
// level solver is attempted.
BilevelCertificate bilevel_kkt_residual(
    const Vec& x, const Point& q, const Point& p, const BvldProblem& prob,
    const std::function<double(const Vec&, const Point&)>& upper);

}  // namespace bvld
