#pragma once

// Mirror geometry: Legendre potentials, Bregman divergences and the
// identities the rest of the library leans on.

#include <functional>
#include <random>

#include "bvld/errors.hpp"
#include "bvld/types.hpp"

namespace bvld {

class Objective;  // problems.hpp

// A Legendre potential psi together with its mirror map grad(), the inverse
// map grad_inv() and a strong-convexity modulus mu (w.r.t. the l2 norm).
//
// Built-ins:
//  * Euclidean: psi(x) = (mu/2) |x|^2 on all of R^d.
//  * NegativeEntropy: psi(x) = sum_i x_i log x_i on the open positive
//    orthant. mu = 1 is valid on the region {0 < x_i <= 1}, which contains
//    the probability simplex; it degrades for coordinates above 1.
//  * Custom: caller-supplied evaluators plus a declared mu, spot-verified on
//    sampled pairs at construction (ConstantError on violation).
class Potential {
 public:
  enum class Kind { Euclidean, NegativeEntropy, Custom };

  struct CustomSpec {
    int dim = 0;
    double mu = 0.0;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;
    std::function<Vec(const Vec&)> grad_inv;
    // Optional; defaults to "all entries finite".
    std::function<bool(const Vec&)> in_domain;
    // Optional sampler over the domain used by the construction-time checks;
    // defaults to uniform draws from [-1, 1]^dim filtered by in_domain.
    std::function<Vec(std::mt19937_64&)> sample;
    std::uint64_t verify_seed = 20240901;
  };

  static Potential euclidean(int dim, double mu = 1.0);
  static Potential negative_entropy(int dim);
  static Potential custom(CustomSpec spec);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double mu() const { return mu_; }

  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Vec grad_inv(const Vec& u) const;
  bool in_domain(const Vec& x) const;
  // Throws DomainError naming `who` when x is outside the interior domain.
  void require_domain(const Vec& x, const char* who) const;

  // Applies the inverse Hessian of psi at x to v, i.e. the Jacobian of
  // grad_inv at grad(x). Available for the built-in kinds; used by line
  // searches to turn mirror directions into primal slopes.
  bool has_inv_hessian() const;
  Vec inv_hessian_apply(const Vec& x, const Vec& v) const;

 private:
  Potential() = default;

  Kind kind_ = Kind::Euclidean;
  int dim_ = 0;
  double mu_ = 1.0;
  CustomSpec custom_;
};

// D_psi(x || y) = psi(x) - psi(y) - <grad psi(y), x - y>, the Bregman
// divergence anchored at y. Both points must lie in the interior domain.
double bregman_div(const Potential& psi, const Point& x, const Point& y);

// Defect of the three-point identity
//   D(x||y) + D(y||z) - D(x||z) = <grad psi(z) - grad psi(y), x - y>,
// which is zero in exact arithmetic for every Bregman divergence.
double three_point_residual(const Potential& psi, const Point& x,
                            const Point& y, const Point& z);

// Co-coercivity slack <grad f(x)-grad f(y), x-y> - (1/L)|grad f(x)-grad
// f(y)|^2; nonnegative for convex f with L-Lipschitz gradients.
double cocoercivity_gap(const Objective& f, const Point& x, const Point& y);

}  // namespace bvld
