#pragma once

// Proximal envelope E(p) = min_q { f(q) + D_psi(q || p) }: evaluation, its
// mirror gradient, Fenchel duality gap, and convergence-rate diagnostics.

#include <vector>

#include "bvld/solver.hpp"

namespace bvld {

struct EnvelopeEval {
  double value = 0.0;      // E(p)
  DualPoint mirror_grad;   // grad psi(p) - grad psi(argmin)
  Point argmin;            // T(p)
};

EnvelopeEval envelope_eval(const BvldProblem& prob, const Point& p,
                           const SolveOptions& opts = {});

// E(p) minus the Fenchel dual objective evaluated at the mirror gradient;
// nonnegative, and ~0 at optimality for the conjugate-available pairings
// (Euclidean potential + nonsingular quadratic loss on the whole space;
// negative entropy + linear loss on the simplex). ConjugateUnavailable
// otherwise.
double dual_gap(const BvldProblem& prob, const Point& p,
                const SolveOptions& opts = {});

enum class RateRegime { Finite, Linear, Sublinear };

struct RateEstimate {
  RateRegime regime = RateRegime::Linear;
  double theta_hat = 0.5;          // Lojasiewicz exponent consistent with regime
  double rho_hat = 0.0;            // per-step contraction 1 - exp(slope), Linear only
  double fit_r2 = 0.0;             // R^2 of the selected fit
  double slope = 0.0;              // log-gap slope vs iteration (Linear fit)
  double sublinear_exponent = 0.0; // log-gap slope vs log iteration (power fit)
  int usable = 0;                  // points entering the fits
};

// Classifies a positive gap series F_k: Finite when it collapses below 1e-14
// before 10 usable points accrue, otherwise Linear vs Sublinear by comparing
// the R^2 of log F_k against k and against log k (margin 0.05, Linear
// preferred unless it shows no decay). InsufficientData when fewer than 10
// usable points exist.
RateEstimate estimate_rate(const std::vector<double>& gaps);

// Smallest sampled ratio 0.5 |mirror_grad|^2 / (E(p) - E(p*)), a gradient-
// dominance constant over the probe set. Samples with gap < 1e-12 are
// skipped; NoValidSamples if every sample is skipped.
double pl_constant_probe(const BvldProblem& prob,
                         const std::vector<Point>& samples,
                         const SolveOptions& opts = {});

}  // namespace bvld
