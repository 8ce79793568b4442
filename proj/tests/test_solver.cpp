#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Cholesky>
#include <cmath>
#include <functional>
#include <vector>

#include "bvld/random.hpp"
#include "bvld/solver.hpp"
#include "doctest.h"

using namespace bvld;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

BvldProblem quad_whole(const Mat& a, const Vec& b, double mu = 1.0) {
  return BvldProblem::make(Objective::quadratic(a, b),
                           Potential::euclidean(int(a.rows()), mu),
                           FeasibleSet::whole(int(a.rows())));
}

}  // namespace

TEST_CASE("euclidean quadratic step matches the normal-equation solution") {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 4.0;
  const BvldProblem prob = quad_whole(a, Vec::Zero(2));
  const SolveResult r = apply_exact(prob, v2(1.0, 1.0));
  CHECK(r.status == SolveStatus::Converged);
  CHECK(r.q[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.q[1] == doctest::Approx(0.2).epsilon(1e-12));

  // same instance through the iterative path
  const SolveResult rq = apply_qn(prob, v2(1.0, 1.0));
  CHECK(rq.status == SolveStatus::Converged);
  CHECK((rq.q - r.q).norm() < 1e-9);
}

TEST_CASE("scaled potentials shift the step toward the anchor") {
  std::mt19937_64 rng(31);
  const int d = 5;
  const Mat a = random_spd(rng, d, 1.0, 6.0);
  const Vec b = gaussian_vec(rng, d);
  for (const double mu : {0.5, 1.0, 4.0}) {
    const BvldProblem prob = quad_whole(a, b, mu);
    const Vec p = gaussian_vec(rng, d);
    // oracle: (A + mu I) q = mu p + b
    const Mat lhs = a + mu * Mat::Identity(d, d);
    const Vec want = lhs.ldlt().solve(mu * p + b);
    const SolveResult r = apply_exact(prob, p);
    CHECK((r.q - want).norm() < 1e-10 * (1.0 + want.norm()));
    CHECK(r.kkt_residual < 1e-10);
  }
}

TEST_CASE("huberized step lands at the hand value inside the linear region") {
  // center (2,0), delta 1, anchor 0: coordinate 0 settles where the huber
  // slope -1 cancels the proximity pull, so q = (1, 0).
  const Objective f = Objective::huberized(v2(2.0, 0.0), 1.0);
  const BvldProblem prob = BvldProblem::make(f, Potential::euclidean(2, 1.0),
                                             FeasibleSet::whole(2));
  const SolveResult r = apply_exact(prob, Vec::Zero(2));
  CHECK(r.status == SolveStatus::Converged);
  CHECK(r.q[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(r.q[1]) < 1e-10);
}

TEST_CASE("entropic step on the simplex matches the multiplicative form") {
  // linear cost + negative entropy: T(p) is p reweighted by exp(-c),
  // renormalized. Written out directly, independent of any solver.
  std::mt19937_64 rng(17);
  for (int inst = 0; inst < 8; ++inst) {
    const int d = 3 + int(rng() % 4);
    const Vec c = gaussian_vec(rng, d);
    const Vec p = random_simplex_interior(rng, d, 1e-2);
    Vec want = p.array() * (-c.array()).exp();
    want /= want.sum();

    const BvldProblem prob =
        BvldProblem::make(Objective::linear(c), Potential::negative_entropy(d),
                          FeasibleSet::simplex(d));
    const SolveResult r = apply_exact(prob, p);
    CHECK(r.status == SolveStatus::Converged);
    CHECK((r.q - want).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("box-constrained diagonal quadratics clamp coordinatewise") {
  std::mt19937_64 rng(29);
  const int d = 6;
  for (int inst = 0; inst < 8; ++inst) {
    Mat a = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) a(i, i) = 1.0 + 5.0 * uniform01(rng);
    const Vec b = 2.0 * gaussian_vec(rng, d);
    const Vec lo = Vec::Constant(d, -0.3), hi = Vec::Constant(d, 0.4);
    const BvldProblem prob =
        BvldProblem::make(Objective::quadratic(a, b),
                          Potential::euclidean(d, 1.0), FeasibleSet::box(lo, hi));
    Vec p(d);
    for (int i = 0; i < d; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * uniform01(rng);
    // separable subproblem: q_i = clamp((p_i + b_i) / (a_ii + 1), lo, hi)
    Vec want(d);
    for (int i = 0; i < d; ++i)
      want[i] = std::clamp((p[i] + b[i]) / (a(i, i) + 1.0), lo[i], hi[i]);
    const SolveResult r = apply_exact(prob, p);
    CHECK(r.status == SolveStatus::Converged);
    CHECK((r.q - want).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("exact, quasi-newton and tight inexact solutions agree") {
  std::mt19937_64 rng(41);
  const int d = 4;
  const Mat a = random_spd(rng, d, 1.0, 6.0);
  const Vec b = gaussian_vec(rng, d);
  const Vec center = gaussian_vec(rng, d);

  struct Case {
    BvldProblem prob;
    Point p;
  };
  std::vector<Case> cases;
  cases.push_back({quad_whole(a, b), gaussian_vec(rng, d)});
  cases.push_back({BvldProblem::make(Objective::log_sum_exp(d, 0.5),
                                     Potential::euclidean(d, 1.0),
                                     FeasibleSet::whole(d)),
                   gaussian_vec(rng, d)});
  cases.push_back({BvldProblem::make(Objective::huberized(center, 0.7),
                                     Potential::euclidean(d, 1.0),
                                     FeasibleSet::whole(d)),
                   gaussian_vec(rng, d)});
  cases.push_back({BvldProblem::make(Objective::quadratic(a, b),
                                     Potential::negative_entropy(d),
                                     FeasibleSet::simplex(d)),
                   random_simplex_interior(rng, d, 1e-2)});

  for (const Case& c : cases) {
    const SolveResult ex = apply_exact(c.prob, c.p);
    const SolveResult qn = apply_qn(c.prob, c.p);
    CHECK((ex.q - qn.q).norm() < 1e-6);
    const SolveResult ix = apply_inexact(c.prob, c.p, /*t=*/60);
    CHECK((ix.q - ex.q).norm() < 1e-6);
  }
}

TEST_CASE("one application contracts bregman distances by 1 - kappa") {
  std::mt19937_64 rng(53);
  for (int inst = 0; inst < 5; ++inst) {
    const int d = 3 + int(rng() % 6);
    const Mat a = random_spd(rng, d, 1.0, 8.0);
    const Vec b = gaussian_vec(rng, d);
    const BvldProblem prob = quad_whole(a, b);
    for (int k = 0; k < 50; ++k) {
      const Vec p1 = gaussian_vec(rng, d), p2 = gaussian_vec(rng, d);
      const double before = bregman_div(prob.potential, p1, p2);
      const double after = bregman_div(prob.potential, apply_exact(prob, p1).q,
                                       apply_exact(prob, p2).q);
      CHECK(after <= (1.0 - prob.kappa) * before + 1e-9);
    }
  }
}

TEST_CASE("the step never increases the proximal objective above f(p)") {
  std::mt19937_64 rng(61);
  const int d = 4;
  const Mat a = random_spd(rng, d, 1.0, 6.0);
  const BvldProblem probs[] = {
      quad_whole(a, gaussian_vec(rng, d)),
      BvldProblem::make(Objective::log_sum_exp(d, 0.4),
                        Potential::euclidean(d, 1.0), FeasibleSet::whole(d)),
      BvldProblem::make(Objective::quadratic(a, gaussian_vec(rng, d)),
                        Potential::negative_entropy(d), FeasibleSet::simplex(d)),
  };
  for (const BvldProblem& prob : probs) {
    for (int k = 0; k < 20; ++k) {
      const Point p = prob.feasible.kind() == FeasibleSet::Kind::Simplex
                          ? random_simplex_interior(rng, d, 1e-2)
                          : Point(gaussian_vec(rng, d));
      const SolveResult r = apply_exact(prob, p);
      // q = p is feasible for the subproblem, so the optimum cannot exceed
      // f(p) + D(p||p) = f(p)
      CHECK(bvld_objective(prob, r.q, p) <=
            prob.objective.value(p) + 1e-10 * (1.0 + std::abs(r.objective_value)));
    }
  }
}

TEST_CASE("solutions satisfy the subproblem variational inequality") {
  std::mt19937_64 rng(71);
  const int d = 5;
  const Mat a = random_spd(rng, d, 1.0, 6.0);
  const Vec b = gaussian_vec(rng, d);
  const Vec lo = Vec::Constant(d, -0.4), hi = Vec::Constant(d, 0.5);
  struct Case {
    BvldProblem prob;
    std::function<Vec()> draw;
  };
  std::vector<Case> cases;
  cases.push_back({BvldProblem::make(Objective::quadratic(a, b),
                                     Potential::euclidean(d, 1.0),
                                     FeasibleSet::box(lo, hi)),
                   [&] { return Vec(lo + (hi - lo).cwiseProduct(
                                             (gaussian_vec(rng, d).array().tanh() *
                                              0.5 + 0.5).matrix())); }});
  cases.push_back({BvldProblem::make(Objective::quadratic(a, b),
                                     Potential::negative_entropy(d),
                                     FeasibleSet::simplex(d)),
                   [&] { return random_simplex_interior(rng, d, 1e-3); }});
  for (const Case& c : cases) {
    const Point p = c.prob.feasible.kind() == FeasibleSet::Kind::Simplex
                        ? random_simplex_interior(rng, d, 1e-2)
                        : Point(Vec::Zero(d));
    const SolveResult r = apply_exact(c.prob, p);
    REQUIRE(r.status == SolveStatus::Converged);
    const Vec g = c.prob.objective.grad(r.q) + c.prob.potential.grad(r.q) -
                  c.prob.potential.grad(p);
    for (int k = 0; k < 200; ++k) CHECK(g.dot(c.draw() - r.q) >= -1e-8);
  }
}

TEST_CASE("a stationary anchor is recognized without iterating") {
  Mat a = Mat::Identity(3, 3) * 2.0;
  Vec b(3);
  b << 2.0, -4.0, 6.0;
  const BvldProblem prob = quad_whole(a, b);
  const Point pstar = *prob.objective.minimizer();  // T(p*) = p*
  const SolveResult r = apply_qn(prob, pstar);
  CHECK(r.status == SolveStatus::Converged);
  CHECK(r.inner_iters == 0);
  CHECK((r.q - pstar).norm() == 0.0);
  CHECK(r.kkt_residual < 1e-14);
}

TEST_CASE("quasi-newton accepts tighter tolerances than the defaults") {
  std::mt19937_64 rng(83);
  const int d = 8;
  const BvldProblem prob = quad_whole(random_spd(rng, d, 1.0, 6.0),
                                      gaussian_vec(rng, d));
  SolveOptions opts;
  opts.tol_stationarity = 1e-12;
  const SolveResult r = apply_qn(prob, gaussian_vec(rng, d), opts);
  CHECK(r.kkt_residual <= 1e-11);  // small slack over the requested target
  CHECK(r.inner_iters <= 50);
}

TEST_CASE("inexact certificates: the gap closes on the delta schedule") {
  // log-sum-exp has no closed form, so the inner tolerance derived from
  // delta_t is what actually certifies the value gap here
  std::mt19937_64 rng(97);
  const int d = 4;
  const BvldProblem prob =
      BvldProblem::make(Objective::log_sum_exp(d, 0.5),
                        Potential::euclidean(d, 1.0), FeasibleSet::whole(d));
  const Point p = gaussian_vec(rng, d);
  SolveOptions ref_opts;
  ref_opts.tol_stationarity = 1e-12;
  const double best_value = apply_qn(prob, p, ref_opts).objective_value;

  SolveOptions opts;  // delta_t = 1e-4 * 0.5^t
  for (const int t : {0, 3, 8}) {
    const double delta_t = opts.delta0 * std::pow(opts.delta_rate, t);
    const SolveResult r = apply_inexact(prob, p, t, opts);
    CHECK(bvld_objective(prob, r.q, p) - best_value <= delta_t + 1e-12);
    CHECK(r.alpha > 0.0);
    CHECK(r.alpha <= 1.0);
  }

  // delta0 = 0 degenerates to the exact solver
  SolveOptions tight;
  tight.delta0 = 0.0;
  const SolveResult r0 = apply_inexact(prob, p, 0, tight);
  CHECK(std::abs(bvld_objective(prob, r0.q, p) - best_value) < 1e-8);
}

TEST_CASE("linear objectives drive the relaxation onto the documented fallback") {
  // For linear f the mirror-form acceptance test is strict at every step
  // size, so the classical sufficient-decrease branch must engage and accept
  // the full step.
  const BvldProblem prob =
      BvldProblem::make(Objective::linear(v2(0.8, -0.3)),
                        Potential::euclidean(2, 1.0), FeasibleSet::whole(2));
  const SolveResult r = apply_inexact(prob, v2(0.2, 0.1), 0);
  CHECK(r.armijo_fallback);
  CHECK(r.alpha == doctest::Approx(1.0));
  // the step itself is still the exact prox p - c
  CHECK((r.next_p - (v2(0.2, 0.1) - v2(0.8, -0.3))).norm() < 1e-9);
}

TEST_CASE("anchors outside the potential domain are rejected") {
  const BvldProblem prob =
      BvldProblem::make(Objective::linear(v2(1.0, 1.0)),
                        Potential::negative_entropy(2), FeasibleSet::simplex(2));
  CHECK_THROWS_AS(apply_exact(prob, v2(-0.1, 1.1)), DomainError);
  CHECK_THROWS_AS(apply_qn(prob, v2(0.0, 1.0)), DomainError);
}

TEST_CASE("solve options are validated before any work") {
  const BvldProblem prob = quad_whole(Mat::Identity(2, 2), Vec::Zero(2));
  SolveOptions opts;
  opts.armijo_gamma = 1.5;
  CHECK_THROWS_AS(apply_exact(prob, v2(0.1, 0.2), opts), ConfigError);
  opts = {};
  opts.tol_stationarity = -1.0;
  CHECK_THROWS_AS(apply_qn(prob, v2(0.1, 0.2), opts), ConfigError);
  opts = {};
  opts.delta_rate = 0.0;
  CHECK_THROWS_AS(apply_inexact(prob, v2(0.1, 0.2), 0, opts), ConfigError);
}
