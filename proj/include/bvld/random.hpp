#pragma once

// Deterministic sampling helpers. Every stochastic routine in the library
// draws through these so that a fixed seed reproduces traces bit for bit;
// std::normal_distribution is implementation-defined and is avoided.

#include <cmath>
#include <cstdint>
#include <random>

#include "bvld/types.hpp"

namespace bvld {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable seed derivation for nested tasks (sweep cells, repetitions, noise
// streams) from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = master;
  splitmix64(s);
  s ^= 0x632be59bd9b4e019ULL + a;
  splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ULL * (b + 1);
  splitmix64(s);
  s ^= 0xc2b2ae3d27d4eb4fULL * (c + 1);
  return splitmix64(s);
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller normal sampler over the fully specified mt19937_64 stream.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01(rng_);  // (0, 1]
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec vector(int dim) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = next();
    return v;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline Vec gaussian_vec(std::mt19937_64& rng, int dim) {
  GaussianSampler tmp(0);
  Vec v(dim);
  // Inline Box-Muller on the caller's engine (no spare caching across calls).
  for (int i = 0; i < dim; ++i) {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  return v;
}

// Random orthogonal matrix via Householder QR of a Gaussian matrix with the
// usual sign fix, giving a deterministic Haar-like draw.
Mat random_orthogonal(std::mt19937_64& rng, int dim);

// Symmetric matrix with eigenvalues drawn uniformly from [eig_lo, eig_hi].
Mat random_spd(std::mt19937_64& rng, int dim, double eig_lo, double eig_hi);

// Interior simplex point with all coordinates >= floor.
Vec random_simplex_interior(std::mt19937_64& rng, int dim,
                            double floor = 1e-3);

}  // namespace bvld
