#include "bvld/problems.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bvld/random.hpp"

namespace bvld {
namespace {

constexpr double kSymTol = 1e-10;
constexpr double kSpectrumTol = -1e-10;
constexpr double kInvertibleTol = 1e-12;

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_grad(double r, double delta) {
  if (r > delta) return delta;
  if (r < -delta) return -delta;
  return r;
}

}  // namespace

Objective Objective::quadratic(Mat a, Vec b) {
  if (a.rows() != a.cols())
    throw ShapeError("Objective::quadratic: A must be square");
  if (b.size() != a.rows())
    throw ShapeError("Objective::quadratic: b does not match A");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale)
    throw ShapeError("Objective::quadratic: A must be symmetric");
  Mat sym = 0.5 * (a + a.transpose());

  auto data = std::make_shared<QuadData>();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  data->eig_min = es.eigenvalues().minCoeff();
  data->eig_max = es.eigenvalues().maxCoeff();
  if (data->eig_min < kSpectrumTol)
    throw SpectrumError("Objective::quadratic: A has eigenvalue " +
                        std::to_string(data->eig_min) + " below tolerance");
  data->invertible = data->eig_min > kInvertibleTol * std::max(1.0, data->eig_max);
  data->a = std::move(sym);
  if (data->invertible) data->ldlt.compute(data->a);

  Objective f;
  f.kind_ = Kind::Quadratic;
  f.dim_ = int(b.size());
  f.lipschitz_ = std::max(data->eig_max, 0.0);
  f.vec_ = std::move(b);
  f.quad_ = data;
  if (data->invertible) f.minimizer_ = data->ldlt.solve(f.vec_);
  return f;
}

Objective Objective::linear(Vec c, double lipschitz) {
  if (c.size() == 0) throw ShapeError("Objective::linear: empty cost");
  if (!(lipschitz > 0.0))
    throw ConstantError("Objective::linear: L must be positive");
  Objective f;
  f.kind_ = Kind::Linear;
  f.dim_ = int(c.size());
  f.lipschitz_ = lipschitz;  // any positive bound is valid: the gradient is constant
  f.vec_ = std::move(c);
  return f;
}

Objective Objective::log_sum_exp(int dim, double scale) {
  if (dim <= 0) throw ShapeError("Objective::log_sum_exp: dim must be positive");
  if (!(scale > 0.0))
    throw ConstantError("Objective::log_sum_exp: scale must be positive");
  Objective f;
  f.kind_ = Kind::LogSumExp;
  f.dim_ = dim;
  f.scale_ = scale;
  f.lipschitz_ = 1.0 / scale;
  return f;
}

Objective Objective::huberized(Vec center, double delta) {
  if (center.size() == 0) throw ShapeError("Objective::huberized: empty center");
  if (!(delta > 0.0))
    throw ConstantError("Objective::huberized: delta must be positive");
  Objective f;
  f.kind_ = Kind::Huberized;
  f.dim_ = int(center.size());
  f.delta_ = delta;
  f.lipschitz_ = 1.0;
  f.minimizer_ = center;
  f.vec_ = std::move(center);
  return f;
}

Objective Objective::custom(CustomSpec spec) {
  if (spec.dim <= 0) throw ShapeError("Objective::custom: dim must be positive");
  if (!(spec.lipschitz > 0.0))
    throw ConstantError("Objective::custom: declared L must be positive");
  if (!spec.value || !spec.grad)
    throw ConstantError("Objective::custom: value and grad are required");
  if (!spec.sample) {
    const int d = spec.dim;
    spec.sample = [d](std::mt19937_64& rng) {
      Vec v(d);
      for (int i = 0; i < d; ++i) v[i] = 2.0 * uniform01(rng) - 1.0;
      return v;
    };
  }

  if (spec.verify) {
    std::mt19937_64 rng(spec.verify_seed);
    constexpr int kPairs = 1000;
    for (int k = 0; k < kPairs; ++k) {
      const Vec x = spec.sample(rng);
      const Vec y = spec.sample(rng);
      const Vec gx = spec.grad(x);
      // Convexity: f(y) >= f(x) + <grad f(x), y - x>.
      const double cvx = spec.value(y) - spec.value(x) - gx.dot(y - x);
      if (cvx < -1e-9)
        throw ConstantError(
            "Objective::custom: convexity violated on a sampled pair (slack " +
            std::to_string(cvx) + ")");
      // Smoothness: |grad f(x) - grad f(y)| <= L |x - y|.
      const double gn = (gx - spec.grad(y)).norm();
      if (gn > spec.lipschitz * (x - y).norm() + 1e-9)
        throw ConstantError(
            "Objective::custom: declared L violated on a sampled pair");
    }
  }

  Objective f;
  f.kind_ = Kind::Custom;
  f.dim_ = spec.dim;
  f.lipschitz_ = spec.lipschitz;
  f.minimizer_ = spec.minimizer;
  f.custom_ = std::make_shared<const CustomSpec>(std::move(spec));
  return f;
}

double Objective::value(const Vec& q) const {
  if (q.size() != dim_) throw ShapeError("Objective::value: dimension mismatch");
  switch (kind_) {
    case Kind::Quadratic:
      return 0.5 * q.dot(quad_->a * q) - vec_.dot(q);
    case Kind::Linear:
      return vec_.dot(q);
    case Kind::LogSumExp: {
      const Vec z = q / scale_;
      const double m = z.maxCoeff();
      return scale_ * (m + std::log((z.array() - m).exp().sum()));
    }
    case Kind::Huberized: {
      double s = 0.0;
      for (int i = 0; i < dim_; ++i) s += huber(q[i] - vec_[i], delta_);
      return s;
    }
    case Kind::Custom:
      return custom_->value(q);
  }
  return 0.0;
}

Vec Objective::grad(const Vec& q) const {
  if (q.size() != dim_) throw ShapeError("Objective::grad: dimension mismatch");
  switch (kind_) {
    case Kind::Quadratic:
      return quad_->a * q - vec_;
    case Kind::Linear:
      return vec_;
    case Kind::LogSumExp: {
      const Vec z = q / scale_;
      const double m = z.maxCoeff();
      Vec e = (z.array() - m).exp().matrix();
      return e / e.sum();
    }
    case Kind::Huberized: {
      Vec g(dim_);
      for (int i = 0; i < dim_; ++i) g[i] = huber_grad(q[i] - vec_[i], delta_);
      return g;
    }
    case Kind::Custom:
      return custom_->grad(q);
  }
  return q;
}

const Mat& Objective::quad_matrix() const {
  if (kind_ != Kind::Quadratic)
    throw ShapeError("Objective::quad_matrix: not a quadratic objective");
  return quad_->a;
}

const Vec& Objective::linear_term() const {
  if (kind_ != Kind::Quadratic && kind_ != Kind::Linear)
    throw ShapeError("Objective::linear_term: no linear term for this kind");
  return vec_;
}

double Objective::quad_eig_min() const {
  if (kind_ != Kind::Quadratic)
    throw ShapeError("Objective::quad_eig_min: not a quadratic objective");
  return quad_->eig_min;
}

bool Objective::quad_invertible() const {
  return kind_ == Kind::Quadratic && quad_->invertible;
}

Vec Objective::quad_solve(const Vec& rhs) const {
  if (!quad_invertible())
    throw SpectrumError("Objective::quad_solve: A is singular or not quadratic");
  return quad_->ldlt.solve(rhs);
}

Objective Objective::with_linear_term(Vec b) const {
  if (kind_ == Kind::Linear) {
    Objective f = *this;
    if (b.size() != dim_)
      throw ShapeError("Objective::with_linear_term: dimension mismatch");
    f.vec_ = std::move(b);
    return f;
  }
  if (kind_ != Kind::Quadratic)
    throw ShapeError("Objective::with_linear_term: requires quadratic/linear");
  if (b.size() != dim_)
    throw ShapeError("Objective::with_linear_term: dimension mismatch");
  Objective f = *this;
  f.vec_ = std::move(b);
  f.minimizer_ =
      quad_->invertible ? std::optional<Vec>(quad_->ldlt.solve(f.vec_))
                        : std::nullopt;
  return f;
}

FeasibleSet FeasibleSet::whole(int dim) {
  if (dim <= 0) throw ShapeError("FeasibleSet::whole: dim must be positive");
  FeasibleSet s;
  s.kind_ = Kind::Whole;
  s.dim_ = dim;
  return s;
}

FeasibleSet FeasibleSet::box(Vec lo, Vec hi) {
  if (lo.size() == 0 || lo.size() != hi.size())
    throw ShapeError("FeasibleSet::box: bounds must match and be nonempty");
  if (((hi - lo).array() < 0.0).any())
    throw DomainError("FeasibleSet::box: requires lo <= hi");
  FeasibleSet s;
  s.kind_ = Kind::Box;
  s.dim_ = int(lo.size());
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

FeasibleSet FeasibleSet::simplex(int dim) {
  if (dim <= 0) throw ShapeError("FeasibleSet::simplex: dim must be positive");
  FeasibleSet s;
  s.kind_ = Kind::Simplex;
  s.dim_ = dim;
  return s;
}

bool FeasibleSet::contains(const Vec& q, double tol) const {
  if (q.size() != dim_ || !q.allFinite()) return false;
  switch (kind_) {
    case Kind::Whole:
      return true;
    case Kind::Box:
      return ((q - lo_).array() >= -tol).all() &&
             ((hi_ - q).array() >= -tol).all();
    case Kind::Simplex:
      return (q.array() >= -tol).all() && std::abs(q.sum() - 1.0) <= tol * dim_;
  }
  return false;
}

Vec FeasibleSet::project(const Vec& q) const {
  if (q.size() != dim_) throw ShapeError("FeasibleSet::project: dimension mismatch");
  switch (kind_) {
    case Kind::Whole:
      return q;
    case Kind::Box:
      return q.cwiseMax(lo_).cwiseMin(hi_);
    case Kind::Simplex: {
      // Sort-based Euclidean projection onto {v >= 0, sum v = 1}.
      std::vector<double> u(q.data(), q.data() + dim_);
      std::sort(u.begin(), u.end(), std::greater<double>());
      double css = 0.0, theta = 0.0;
      int rho = 0;
      for (int i = 0; i < dim_; ++i) {
        css += u[size_t(i)];
        const double t = (css - 1.0) / double(i + 1);
        if (u[size_t(i)] - t > 0.0) {
          rho = i + 1;
          theta = t;
        }
      }
      (void)rho;
      return (q.array() - theta).max(0.0).matrix();
    }
  }
  return q;
}

double FeasibleSet::stationarity_residual(const Vec& q, const Vec& g,
                                          double active_tol) const {
  if (q.size() != dim_ || g.size() != dim_)
    throw ShapeError("FeasibleSet::stationarity_residual: dimension mismatch");
  switch (kind_) {
    case Kind::Whole:
      return g.norm();
    case Kind::Box: {
      Vec r = g;
      for (int i = 0; i < dim_; ++i) {
        const bool at_lo = q[i] - lo_[i] <= active_tol;
        const bool at_hi = hi_[i] - q[i] <= active_tol;
        // Minus g must lie in the normal cone: at the lower bound a positive
        // gradient component is absorbed, at the upper bound a negative one.
        if (at_lo && g[i] > 0.0) r[i] = 0.0;
        if (at_hi && g[i] < 0.0) r[i] = 0.0;
      }
      return r.norm();
    }
    case Kind::Simplex: {
      // Stationarity over the simplex: g is a constant on the support, and
      // off-support coordinates may only exceed that constant.
      double mean = 0.0;
      int support = 0;
      for (int i = 0; i < dim_; ++i) {
        if (q[i] > active_tol) {
          mean += g[i];
          ++support;
        }
      }
      if (support == 0) return g.norm();
      mean /= double(support);
      double ss = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double centered = g[i] - mean;
        if (q[i] > active_tol) {
          ss += centered * centered;
        } else if (centered < 0.0) {
          ss += centered * centered;
        }
      }
      return std::sqrt(ss);
    }
  }
  return g.norm();
}

BvldProblem BvldProblem::make(Objective objective, Potential potential,
                              FeasibleSet feasible) {
  if (objective.dim() != potential.dim() ||
      objective.dim() != feasible.dim())
    throw ShapeError("BvldProblem::make: objective/potential/feasible "
                     "dimensions disagree");
  const double mu = potential.mu();
  const double lip = objective.lipschitz();
  if (!(lip > 0.0))
    throw ConstantError("BvldProblem::make: objective must declare L > 0");
  BvldProblem p{std::move(objective), std::move(potential),
                std::move(feasible), mu / (mu + lip)};
  return p;
}

double kkt_residual(const BvldProblem& prob, const Point& p, const Point& q) {
  prob.potential.require_domain(p, "kkt_residual(p)");
  prob.potential.require_domain(q, "kkt_residual(q)");
  if (!prob.feasible.contains(q, 1e-9))
    throw DomainError("kkt_residual: q is infeasible");
  const Vec g =
      prob.objective.grad(q) + prob.potential.grad(q) - prob.potential.grad(p);
  return prob.feasible.stationarity_residual(q, g);
}

}  // namespace bvld
