#include "bvld/random.hpp"

#include <Eigen/Dense>

namespace bvld {

Mat random_orthogonal(std::mt19937_64& rng, int dim) {
  Mat g(dim, dim);
  for (int j = 0; j < dim; ++j) g.col(j) = gaussian_vec(rng, dim);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Mat random_spd(std::mt19937_64& rng, int dim, double eig_lo, double eig_hi) {
  Vec eigs(dim);
  for (int i = 0; i < dim; ++i)
    eigs[i] = eig_lo + (eig_hi - eig_lo) * uniform01(rng);
  const Mat q = random_orthogonal(rng, dim);
  Mat a = q * eigs.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());  // exact symmetry
}

Vec random_simplex_interior(std::mt19937_64& rng, int dim, double floor) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i)
    v[i] = -std::log(1.0 - uniform01(rng));  // Exp(1) => Dirichlet(1) after normalizing
  v = (v.array() + 1e-12).matrix();
  v /= v.sum();
  // Blend toward the barycenter so every coordinate clears the floor.
  const double s = std::min(1.0, 1.5 * floor * dim);
  v = (1.0 - s) * v + Vec::Constant(dim, s / dim);
  return v;
}

}  // namespace bvld
