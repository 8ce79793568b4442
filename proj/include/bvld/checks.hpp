#pragma once

// Theorem-check suite behind the `verify` command: every module-level
// invariant measured on seeded instances, one row per invariant.

#include <cstdint>
#include <string>
#include <vector>

#include "bvld/extensions.hpp"

namespace bvld {

struct CheckRow {
  std::string name;    // invariant id, e.g. "operator.contraction"
  std::string metric;  // what `value` measures
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::vector<CheckRow> rows;
  bool all_pass = true;
};

// Runs the whole suite deterministically for the seed. Row order is fixed.
VerifyReport run_all_checks(std::uint64_t seed);

// Brute-force primal robust value: projected-gradient ascent over the
// divergence ball around the nominal weights (feasibility restored by
// bisection toward the nominal), refined from random interior restarts.
// Independent of the dual search in dro_envelope; used as its oracle.
double dro_primal_bruteforce(const AmbiguitySet& amb, const Vec& losses,
                             int iters, std::uint64_t seed);

}  // namespace bvld
