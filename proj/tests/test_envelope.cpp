#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "bvld/envelope.hpp"
#include "bvld/random.hpp"
#include "doctest.h"

using namespace bvld;

namespace {

// f(q) = 1/2 |q|^2 - a'q with unit euclidean geometry: T(p) = (p + a)/2 and
// E(p) = 1/4 |p - a|^2 - 1/2 |a|^2, all in closed form.
BvldProblem halving_problem(const Vec& a) {
  const int d = int(a.size());
  return BvldProblem::make(Objective::quadratic(Mat::Identity(d, d), a),
                           Potential::euclidean(d, 1.0), FeasibleSet::whole(d));
}

}  // namespace

TEST_CASE("envelope value, argmin and mirror gradient in closed form") {
  std::mt19937_64 rng(13);
  const Vec a = gaussian_vec(rng, 4);
  const BvldProblem prob = halving_problem(a);
  for (int k = 0; k < 25; ++k) {
    const Vec p = 2.0 * gaussian_vec(rng, 4);
    const EnvelopeEval e = envelope_eval(prob, p);
    CHECK(e.value == doctest::Approx(0.25 * (p - a).squaredNorm() -
                                     0.5 * a.squaredNorm())
                         .epsilon(1e-10));
    CHECK((e.argmin - 0.5 * (p + a)).norm() < 1e-9);
    CHECK((e.mirror_grad - 0.5 * (p - a)).norm() < 1e-9);
  }
}

TEST_CASE("mirror gradient matches central finite differences") {
  std::mt19937_64 rng(37);
  const Vec a = gaussian_vec(rng, 3);
  const BvldProblem prob = halving_problem(a);
  const Vec p = gaussian_vec(rng, 3);
  const EnvelopeEval e = envelope_eval(prob, p);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Vec step = Vec::Zero(3);
    step[i] = h;
    const double fd = (envelope_eval(prob, p + step).value -
                       envelope_eval(prob, p - step).value) /
                      (2.0 * h);
    CHECK(e.mirror_grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("fenchel gap vanishes on the conjugate-available pairings") {
  std::mt19937_64 rng(43);
  const BvldProblem quad = halving_problem(gaussian_vec(rng, 4));
  for (int k = 0; k < 20; ++k) {
    const double g = dual_gap(quad, gaussian_vec(rng, 4));
    CHECK(std::abs(g) < 1e-8);
  }

  const int d = 5;
  const BvldProblem lin =
      BvldProblem::make(Objective::linear(gaussian_vec(rng, d)),
                        Potential::negative_entropy(d), FeasibleSet::simplex(d));
  for (int k = 0; k < 20; ++k) {
    const double g = dual_gap(lin, random_simplex_interior(rng, d, 1e-2));
    CHECK(std::abs(g) < 1e-8);
  }
}

TEST_CASE("pairings without a closed-form conjugate say so") {
  const BvldProblem lse =
      BvldProblem::make(Objective::log_sum_exp(3, 0.5),
                        Potential::euclidean(3, 1.0), FeasibleSet::whole(3));
  CHECK_THROWS_AS(dual_gap(lse, Vec::Zero(3)), ConjugateUnavailable);
}

TEST_CASE("geometric gap series classify as linear with the right rate") {
  std::vector<double> gaps;
  for (int k = 0; k < 60; ++k) gaps.push_back(2.0 * std::pow(0.9, k));
  const RateEstimate est = estimate_rate(gaps);
  CHECK(est.regime == RateRegime::Linear);
  CHECK(est.slope == doctest::Approx(std::log(0.9)).epsilon(1e-10));
  CHECK(est.rho_hat == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(est.fit_r2 > 0.999);
}

TEST_CASE("power-law series classify as sublinear with the right exponent") {
  // F_k = k^-2 on the usable index k >= 1 (the k = 0 point only feeds the
  // competing linear fit)
  std::vector<double> gaps = {1.0};
  for (int k = 1; k < 80; ++k) gaps.push_back(std::pow(double(k), -2.0));
  const RateEstimate est = estimate_rate(gaps);
  CHECK(est.regime == RateRegime::Sublinear);
  CHECK(std::abs(est.sublinear_exponent + 2.0) < 0.05);
  // dominance exponent mapped from the power: theta = (1 + 1/2) / 2
  CHECK(est.theta_hat == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("flat series are not mistaken for linear convergence") {
  const std::vector<double> gaps(40, 0.7);
  const RateEstimate est = estimate_rate(gaps);
  CHECK(est.regime == RateRegime::Sublinear);
  CHECK(std::abs(est.sublinear_exponent) < 1e-10);
  CHECK(est.rho_hat == 0.0);
}

TEST_CASE("series that collapse to zero immediately are finite convergence") {
  const std::vector<double> gaps = {1e-2, 1e-6, 1e-20};
  const RateEstimate est = estimate_rate(gaps);
  CHECK(est.regime == RateRegime::Finite);
  CHECK(est.usable == 2);
}

TEST_CASE("too few usable points is an error, not a guess") {
  const std::vector<double> gaps = {1.0, 0.9, 0.8, 0.7, 0.6};
  CHECK_THROWS_AS(estimate_rate(gaps), InsufficientData);
}

TEST_CASE("the gradient-dominance probe recovers the exact constant") {
  std::mt19937_64 rng(59);
  const Vec a = gaussian_vec(rng, 4);
  const BvldProblem prob = halving_problem(a);
  // 1/2 |mirror_grad|^2 / (E(p) - E*) = 1/2 exactly for this family
  std::vector<Point> samples;
  for (int k = 0; k < 12; ++k) samples.push_back(a + gaussian_vec(rng, 4));
  CHECK(pl_constant_probe(prob, samples) == doctest::Approx(0.5).epsilon(1e-8));

  // samples sitting at the minimizer have no usable gap
  const std::vector<Point> degenerate(5, a);
  CHECK_THROWS_AS(pl_constant_probe(prob, degenerate), NoValidSamples);
}
