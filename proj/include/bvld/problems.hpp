#pragma once

// Objective families, feasible sets and the problem bundle consumed by the
// proximal solvers.

#include <Eigen/Cholesky>
#include <functional>
#include <memory>
#include <optional>
#include <random>

#include "bvld/errors.hpp"
#include "bvld/geometry.hpp"
#include "bvld/types.hpp"

namespace bvld {

// Convex loss with L-Lipschitz gradients. Built-in families:
//  * Quadratic:  f(q) = 1/2 q'Aq - b'q with A symmetric PSD, L = lambda_max(A)
//  * Linear:     f(q) = c'q; any positive L is a valid gradient bound
//  * LogSumExp:  f(q) = s * log sum_i exp(q_i / s), L = 1/s
//  * Huberized:  f(q) = sum_i huber_delta(q_i - center_i), L = 1
//  * Custom:     caller evaluators with declared L, spot-verified on samples
class Objective {
 public:
  enum class Kind { Quadratic, Linear, LogSumExp, Huberized, Custom };

  struct CustomSpec {
    int dim = 0;
    double lipschitz = 0.0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::optional<Vec> minimizer;
    // Optional sampler for the verification pairs; defaults to [-1,1]^dim.
    std::function<Vec(std::mt19937_64&)> sample;
    bool verify = true;
    std::uint64_t verify_seed = 20240902;
  };

  static Objective quadratic(Mat a, Vec b);
  static Objective linear(Vec c, double lipschitz = 1.0);
  static Objective log_sum_exp(int dim, double scale);
  static Objective huberized(Vec center, double delta);
  static Objective custom(CustomSpec spec);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double lipschitz() const { return lipschitz_; }

  double value(const Vec& q) const;
  Vec grad(const Vec& q) const;

  // Unconstrained minimizer when the family knows one (quadratic with
  // nonsingular A, huberized center, custom-declared).
  const std::optional<Vec>& minimizer() const { return minimizer_; }

  // Quadratic / linear accessors (ShapeError for other kinds).
  const Mat& quad_matrix() const;
  const Vec& linear_term() const;  // b for Quadratic, c for Linear
  // Smallest eigenvalue of A (Quadratic only).
  double quad_eig_min() const;
  // Solves A x = rhs via the cached factorization (Quadratic, nonsingular).
  Vec quad_solve(const Vec& rhs) const;
  bool quad_invertible() const;

  // Copy of a quadratic objective with a new linear term; shares A and its
  // factorization, so per-step retargeting in dynamics stays cheap.
  Objective with_linear_term(Vec b) const;

 private:
  Objective() = default;

  struct QuadData {
    Mat a;
    double eig_min = 0.0;
    double eig_max = 0.0;
    bool invertible = false;
    Eigen::LDLT<Mat> ldlt;
  };

  Kind kind_ = Kind::Quadratic;
  int dim_ = 0;
  double lipschitz_ = 0.0;
  double scale_ = 1.0;   // LogSumExp
  double delta_ = 1.0;   // Huberized
  Vec vec_;              // b (Quadratic), c (Linear), center (Huberized)
  std::shared_ptr<const QuadData> quad_;
  std::optional<Vec> minimizer_;
  std::shared_ptr<const CustomSpec> custom_;
};

// Constraint set for the proximal subproblem.
class FeasibleSet {
 public:
  enum class Kind { Whole, Box, Simplex };

  static FeasibleSet whole(int dim);
  static FeasibleSet box(Vec lo, Vec hi);
  static FeasibleSet simplex(int dim);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Vec& lower() const { return lo_; }
  const Vec& upper() const { return hi_; }

  bool contains(const Vec& q, double tol = 1e-12) const;
  // Euclidean projection onto the set.
  Vec project(const Vec& q) const;

  // Norm of the gradient g after removing components absorbed by the normal
  // cone at q: box coordinates at an active bound with the blocking sign are
  // zeroed; on the simplex g is centered over the support and off-support
  // coordinates only count when they push mass inward.
  double stationarity_residual(const Vec& q, const Vec& g,
                               double active_tol = 1e-9) const;

 private:
  FeasibleSet() = default;

  Kind kind_ = Kind::Whole;
  int dim_ = 0;
  Vec lo_, hi_;
};

// Loss + geometry + constraints, with the contraction modulus
// kappa = mu / (mu + L) derived from the stored constants.
struct BvldProblem {
  Objective objective;
  Potential potential;
  FeasibleSet feasible;
  double kappa = 0.0;

  static BvldProblem make(Objective objective, Potential potential,
                          FeasibleSet feasible);
};

// First-order optimality residual of q for the proximal subproblem anchored
// at p: the stationarity norm of grad f(q) + grad psi(q) - grad psi(p)
// relative to the feasible set.
double kkt_residual(const BvldProblem& prob, const Point& p, const Point& q);

}  // namespace bvld
