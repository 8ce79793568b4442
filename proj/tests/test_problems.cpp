#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "bvld/problems.hpp"
#include "bvld/random.hpp"
#include "doctest.h"

using namespace bvld;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("quadratic objective knows its minimizer and optimal value") {
  Mat a = Mat::Constant(1, 1, 2.0);
  Vec b = Vec::Constant(1, 6.0);
  const Objective f = Objective::quadratic(a, b);
  REQUIRE(f.minimizer().has_value());
  CHECK((*f.minimizer())[0] == doctest::Approx(3.0));
  CHECK(f.value(*f.minimizer()) == doctest::Approx(-9.0));
  CHECK(f.grad(*f.minimizer()).norm() < 1e-14);
  CHECK(f.lipschitz() == doctest::Approx(2.0));
  CHECK(f.quad_eig_min() == doctest::Approx(2.0));
}

TEST_CASE("quadratic construction rejects bad matrices") {
  Mat asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(Objective::quadratic(asym, Vec::Zero(2)), ShapeError);

  Mat indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(Objective::quadratic(indef, Vec::Zero(2)), SpectrumError);

  CHECK_THROWS_AS(Objective::quadratic(Mat::Identity(2, 2), Vec::Zero(3)),
                  ShapeError);
}

TEST_CASE("with_linear_term retargets without refactoring") {
  std::mt19937_64 rng(2);
  const Mat a = random_spd(rng, 4, 1.0, 5.0);
  const Objective f = Objective::quadratic(a, Vec::Zero(4));
  const Vec b = gaussian_vec(rng, 4);
  const Objective g = f.with_linear_term(b);
  CHECK((a * *g.minimizer() - b).norm() < 1e-10);
  CHECK(g.lipschitz() == f.lipschitz());
  // original untouched
  CHECK(f.linear_term().norm() == 0.0);
}

TEST_CASE("log_sum_exp and huberized values and gradients") {
  const Objective lse = Objective::log_sum_exp(3, 0.5);
  CHECK(lse.value(Vec::Zero(3)) == doctest::Approx(0.5 * std::log(3.0)));
  CHECK(lse.lipschitz() == doctest::Approx(2.0));
  // gradient is the softmax, so it sums to one
  Vec x3(3);
  x3 << 0.2, -0.4, 0.1;
  CHECK(lse.grad(x3).sum() == doctest::Approx(1.0).epsilon(1e-12));

  const Vec center = v2(0.3, -0.2);
  const Objective hub = Objective::huberized(center, 0.7);
  CHECK(hub.value(center) == 0.0);
  CHECK(hub.grad(center).norm() == 0.0);
  REQUIRE(hub.minimizer().has_value());
  CHECK((*hub.minimizer() - center).norm() == 0.0);
  // linear region slope is clamped at delta
  Vec far = center;
  far[0] += 10.0;
  CHECK(hub.grad(far)[0] == doctest::Approx(0.7));
}

TEST_CASE("objective gradients agree with finite differences") {
  std::mt19937_64 rng(9);
  const Objective fs[] = {
      Objective::quadratic(random_spd(rng, 4, 1.0, 6.0), gaussian_vec(rng, 4)),
      Objective::log_sum_exp(4, 0.6),
      Objective::huberized(gaussian_vec(rng, 4), 0.5),
      Objective::linear(gaussian_vec(rng, 4)),
  };
  const double h = 1e-6;
  for (const Objective& f : fs) {
    for (int k = 0; k < 10; ++k) {
      const Vec x = 0.5 * gaussian_vec(rng, 4);
      const Vec g = f.grad(x);
      for (int i = 0; i < 4; ++i) {
        Vec e = Vec::Zero(4);
        e[i] = h;
        const double fd = (f.value(x + e) - f.value(x - e)) / (2.0 * h);
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("custom objectives are spot-checked against the declared constant") {
  Objective::CustomSpec spec;
  spec.dim = 2;
  spec.lipschitz = 0.1;  // far below the true constant 2
  spec.value = [](const Vec& x) { return x.squaredNorm(); };
  spec.grad = [](const Vec& x) -> Vec { return 2.0 * x; };
  CHECK_THROWS_AS(Objective::custom(spec), ConstantError);
  spec.lipschitz = 2.0;
  CHECK_NOTHROW(Objective::custom(spec));
}

TEST_CASE("feasible sets project and report membership") {
  const FeasibleSet box = FeasibleSet::box(v2(0, 0), v2(1, 1));
  CHECK(box.contains(v2(0.5, 0.5)));
  CHECK_FALSE(box.contains(v2(1.5, 0.5)));
  CHECK((box.project(v2(1.5, -0.25)) - v2(1.0, 0.0)).norm() == 0.0);

  const FeasibleSet sx = FeasibleSet::simplex(2);
  CHECK((sx.project(v2(2.0, 0.0)) - v2(1.0, 0.0)).norm() < 1e-15);
  const Vec q = sx.project(v2(0.4, 0.1));
  CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(q[0] - q[1] == doctest::Approx(0.3).epsilon(1e-12));

  CHECK_THROWS_AS(FeasibleSet::box(v2(0, 0), v2(1, -1)), DomainError);
}

TEST_CASE("stationarity residual respects the normal cone") {
  const FeasibleSet box = FeasibleSet::box(v2(0, 0), v2(1, 1));
  // at the lower bound a gradient pushing outward is absorbed
  CHECK(box.stationarity_residual(v2(0.0, 0.5), v2(5.0, 0.0)) == 0.0);
  // pushing inward it is not
  CHECK(box.stationarity_residual(v2(0.0, 0.5), v2(-5.0, 0.0)) ==
        doctest::Approx(5.0));
  // interior points keep the full gradient
  CHECK(box.stationarity_residual(v2(0.5, 0.5), v2(3.0, 4.0)) ==
        doctest::Approx(5.0));

  const FeasibleSet sx = FeasibleSet::simplex(2);
  // constant gradients are normal to the simplex
  CHECK(sx.stationarity_residual(v2(0.5, 0.5), v2(7.0, 7.0)) < 1e-12);
  // a vertex with positive slack on the missing coordinate is stationary
  CHECK(sx.stationarity_residual(v2(1.0, 0.0), v2(1.0, 5.0)) < 1e-12);
  // negative slack means mass wants to flow onto the missing coordinate
  CHECK(sx.stationarity_residual(v2(1.0, 0.0), v2(1.0, -1.0)) > 0.5);
}

TEST_CASE("problem bundle derives kappa from the stored constants") {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 3.0;
  const BvldProblem prob =
      BvldProblem::make(Objective::quadratic(a, Vec::Zero(2)),
                        Potential::euclidean(2, 1.0), FeasibleSet::whole(2));
  CHECK(prob.kappa == doctest::Approx(0.25));  // mu/(mu+L) = 1/4

  // kkt_residual vanishes at the subproblem solution (A + I) q = p + b
  const Vec p = v2(0.8, -0.4);
  Mat api = a + Mat::Identity(2, 2);
  const Vec q = api.ldlt().solve(p);
  CHECK(kkt_residual(prob, p, q) < 1e-12);
  CHECK(kkt_residual(prob, p, v2(0.3, 0.3)) > 1e-2);
}

TEST_CASE("dimension mismatches across the bundle are rejected") {
  CHECK_THROWS_AS(
      BvldProblem::make(Objective::quadratic(Mat::Identity(2, 2), Vec::Zero(2)),
                        Potential::euclidean(3, 1.0), FeasibleSet::whole(2)),
      ShapeError);
  CHECK_THROWS_AS(
      BvldProblem::make(Objective::quadratic(Mat::Identity(2, 2), Vec::Zero(2)),
                        Potential::euclidean(2, 1.0), FeasibleSet::simplex(3)),
      ShapeError);
}
