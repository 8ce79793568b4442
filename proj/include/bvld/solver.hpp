#pragma once

// Proximal solvers for one application of the operator
//   T(p) = argmin_{q in Theta} f(q) + D_psi(q || p).

#include "bvld/problems.hpp"
#include "bvld/types.hpp"

namespace bvld {

struct SolveOptions {
  double tol_stationarity = 1e-10;  // KKT residual target
  double tol_step = 1e-12;          // primal step-size stop
  int max_inner_iters = 200;
  double armijo_gamma = 0.5;  // sufficient-decrease fraction
  double armijo_beta = 0.5;   // backtracking shrink factor
  double delta0 = 1e-4;       // inexactness schedule delta_t = delta0 * rate^t
  double delta_rate = 0.5;
  double curvature_guard = 1e-12;  // skip BFGS updates when <y,s> is below

  void validate() const;
};

enum class SolveStatus { Converged, MaxIters, DomainFailure };

struct SolveResult {
  Point q;                   // subproblem solution
  Point next_p;              // iterate handed to the outer dynamics
  DualPoint mirror_residual; // grad psi(p) - grad psi(q)
  double kkt_residual = 0.0;
  double objective_value = 0.0;  // f(q) + D_psi(q || p)
  int inner_iters = 0;
  double alpha = 1.0;            // accepted relaxation step (inexact solver)
  bool armijo_fallback = false;  // mirror-form test rejected; classical used
  SolveStatus status = SolveStatus::Converged;
};

// Value of the proximal objective f(q) + D_psi(q || p).
double bvld_objective(const BvldProblem& prob, const Point& q, const Point& p);

// Projection onto the feasible set in the geometry of the potential
// (Euclidean projection for Euclidean potentials, normalization for
// entropy on the simplex, monotone clamping for entropy on a box).
Point bregman_project(const Potential& psi, const FeasibleSet& set,
                      const Point& x);

// Exact proximal step: closed form for Euclidean potential + quadratic loss
// on the whole space, quasi-Newton refinement everywhere else.
SolveResult apply_exact(const BvldProblem& prob, const Point& p,
                        const SolveOptions& opts = {});

// Inexact proximal step at outer index t: solves the subproblem to the gap
// delta_t = delta0 * delta_rate^t, then relaxes along the mirror segment
// from p to the subproblem solution with a backtracked acceptance test.
// next_p carries the relaxed iterate.
SolveResult apply_inexact(const BvldProblem& prob, const Point& p, int t,
                          const SolveOptions& opts = {});

// Quasi-Newton inner solver: BFGS on the mirror-coordinate residual
// g = grad f(q) + grad psi(q) - grad psi(p), warm-started at q = p with
// H = I, curvature-guarded updates, and backtracking line search on the
// proximal objective.
SolveResult apply_qn(const BvldProblem& prob, const Point& p,
                     const SolveOptions& opts = {});

}  // namespace bvld
