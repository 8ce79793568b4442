#pragma once

#include <Eigen/Core>

namespace bvld {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Primal iterate, required to lie in the interior of the potential's domain.
using Point = Vec;
// Mirror-space coordinates (images under the gradient of the potential).
using DualPoint = Vec;

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bvld
