#include "bvld/geometry.hpp"

#include <cmath>
#include <string>

#include "bvld/problems.hpp"
#include "bvld/random.hpp"

namespace bvld {
namespace {

bool all_finite(const Vec& x) { return x.allFinite(); }

bool all_positive(const Vec& x) {
  return all_finite(x) && (x.array() > 0.0).all();
}

// x log x with the continuous extension 0 log 0 = 0, used so that values of
// boundary points (e.g. projected iterates being logged) stay finite.
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::string dim_msg(const char* who, int got, int want) {
  return std::string(who) + ": dimension " + std::to_string(got) +
         ", expected " + std::to_string(want);
}

}  // namespace

Potential Potential::euclidean(int dim, double mu) {
  if (dim <= 0) throw ShapeError("Potential::euclidean: dim must be positive");
  if (!(mu > 0.0) || !std::isfinite(mu))
    throw ConstantError("Potential::euclidean: mu must be positive");
  Potential p;
  p.kind_ = Kind::Euclidean;
  p.dim_ = dim;
  p.mu_ = mu;
  return p;
}

Potential Potential::negative_entropy(int dim) {
  if (dim <= 0)
    throw ShapeError("Potential::negative_entropy: dim must be positive");
  Potential p;
  p.kind_ = Kind::NegativeEntropy;
  p.dim_ = dim;
  p.mu_ = 1.0;  // valid on {0 < x_i <= 1}, which contains the simplex
  return p;
}

Potential Potential::custom(CustomSpec spec) {
  if (spec.dim <= 0) throw ShapeError("Potential::custom: dim must be positive");
  if (!(spec.mu > 0.0) || !std::isfinite(spec.mu))
    throw ConstantError("Potential::custom: declared mu must be positive");
  if (!spec.value || !spec.grad || !spec.grad_inv)
    throw ConstantError("Potential::custom: value/grad/grad_inv are required");
  if (!spec.in_domain)
    spec.in_domain = [](const Vec& x) { return x.allFinite(); };
  if (!spec.sample) {
    const int d = spec.dim;
    spec.sample = [d](std::mt19937_64& rng) {
      Vec v(d);
      for (int i = 0; i < d; ++i) v[i] = 2.0 * uniform01(rng) - 1.0;
      return v;
    };
  }

  Potential p;
  p.kind_ = Kind::Custom;
  p.dim_ = spec.dim;
  p.mu_ = spec.mu;
  p.custom_ = spec;

  // The declared mu is trusted downstream (it enters kappa), so verify the
  // strong-convexity inequality and the mirror-map round trip on samples.
  std::mt19937_64 rng(spec.verify_seed);
  constexpr int kPairs = 1000;
  constexpr int kRoundTrips = 100;
  int found = 0;
  for (int attempts = 0; found < kPairs && attempts < 50 * kPairs; ++attempts) {
    Vec x = spec.sample(rng);
    Vec y = spec.sample(rng);
    if (!spec.in_domain(x) || !spec.in_domain(y)) continue;
    ++found;
    const double lhs = spec.value(y) - spec.value(x) -
                       spec.grad(x).dot(y - x) -
                       0.5 * spec.mu * (y - x).squaredNorm();
    if (lhs < -1e-9)
      throw ConstantError(
          "Potential::custom: declared mu violates strong convexity on a "
          "sampled pair (slack " + std::to_string(lhs) + ")");
    if (found <= kRoundTrips) {
      const Vec back = spec.grad_inv(spec.grad(x));
      const double err = (back - x).norm() / std::max(1.0, x.norm());
      if (!(err < 1e-8))
        throw ConstantError(
            "Potential::custom: grad_inv(grad(x)) deviates from x "
            "(relative error " + std::to_string(err) + ")");
    }
  }
  if (found < kPairs)
    throw DomainError(
        "Potential::custom: sampler failed to produce enough in-domain "
        "points for verification");
  return p;
}

double Potential::value(const Vec& x) const {
  switch (kind_) {
    case Kind::Euclidean:
      return 0.5 * mu_ * x.squaredNorm();
    case Kind::NegativeEntropy: {
      double s = 0.0;
      for (int i = 0; i < x.size(); ++i) s += xlogx(x[i]);
      return s;
    }
    case Kind::Custom:
      return custom_.value(x);
  }
  return 0.0;
}

Vec Potential::grad(const Vec& x) const {
  switch (kind_) {
    case Kind::Euclidean:
      return mu_ * x;
    case Kind::NegativeEntropy:
      require_domain(x, "Potential::grad");
      return (x.array().log() + 1.0).matrix();
    case Kind::Custom:
      return custom_.grad(x);
  }
  return x;
}

Vec Potential::grad_inv(const Vec& u) const {
  switch (kind_) {
    case Kind::Euclidean:
      return u / mu_;
    case Kind::NegativeEntropy:
      return (u.array() - 1.0).exp().matrix();
    case Kind::Custom:
      return custom_.grad_inv(u);
  }
  return u;
}

bool Potential::in_domain(const Vec& x) const {
  if (x.size() != dim_) return false;
  switch (kind_) {
    case Kind::Euclidean:
      return all_finite(x);
    case Kind::NegativeEntropy:
      return all_positive(x);
    case Kind::Custom:
      return custom_.in_domain(x);
  }
  return false;
}

void Potential::require_domain(const Vec& x, const char* who) const {
  if (x.size() != dim_) throw ShapeError(dim_msg(who, int(x.size()), dim_));
  if (!in_domain(x))
    throw DomainError(std::string(who) +
                      ": point outside the potential's interior domain");
}

bool Potential::has_inv_hessian() const { return kind_ != Kind::Custom; }

Vec Potential::inv_hessian_apply(const Vec& x, const Vec& v) const {
  switch (kind_) {
    case Kind::Euclidean:
      return v / mu_;
    case Kind::NegativeEntropy:
      return (x.array() * v.array()).matrix();
    case Kind::Custom:
      break;
  }
  throw DomainError("Potential::inv_hessian_apply: unavailable for Custom");
}

double bregman_div(const Potential& psi, const Point& x, const Point& y) {
  psi.require_domain(x, "bregman_div(x)");
  psi.require_domain(y, "bregman_div(y)");
  return psi.value(x) - psi.value(y) - psi.grad(y).dot(x - y);
}

double three_point_residual(const Potential& psi, const Point& x,
                            const Point& y, const Point& z) {
  const double lhs =
      bregman_div(psi, x, y) + bregman_div(psi, y, z) - bregman_div(psi, x, z);
  const double rhs = (psi.grad(z) - psi.grad(y)).dot(x - y);
  return lhs - rhs;
}

double cocoercivity_gap(const Objective& f, const Point& x, const Point& y) {
  if (x.size() != f.dim() || y.size() != f.dim())
    throw ShapeError("cocoercivity_gap: point dimension mismatch");
  const Vec gd = f.grad(x) - f.grad(y);
  const double inner = gd.dot(x - y);
  const double lip = f.lipschitz();
  if (!(lip > 0.0))
    throw ConstantError("cocoercivity_gap: objective must declare L > 0");
  return inner - gd.squaredNorm() / lip;
}

}  // namespace bvld
