#pragma once

#include <stdexcept>
#include <string>

namespace bvld {

// Input lies outside the domain of the potential / feasible region.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension or structural mismatch between operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A matrix fails a required spectral property (symmetry / PSD).
struct SpectrumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A declared constant (strong convexity, smoothness) fails sampled checks.
struct ConstantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backtracking step size underflowed; gradients are inconsistent.
struct LineSearchFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No closed-form convex conjugate for the requested pairing.
struct ConjugateUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too few usable observations for a fit.
struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every probe sample was skipped (degenerate gaps).
struct NoValidSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A 1-D search bracket failed to contain the minimizer.
struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalarization weights are off the simplex.
struct WeightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Integrator step size violates the stability limit.
struct StepSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (CSV / JSON), message names row and column.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An ingested series contains no rows.
struct EmptySeries : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A run configuration failed validation; `field` names the offender.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_, const std::string& msg)
      : std::runtime_error(msg), field(std::move(field_)) {}
};

}  // namespace bvld
