#pragma once

#include "chainmpc/types.hpp"

#include <cstdint>
#include <vector>

namespace chainmpc {

/// Box of admissible relative deviations, |p_k| <= bound_k.
struct UncertaintyBox {
  DeviationVector bounds = (DeviationVector() << 0.25, 0.25, 0.24, 0.24, 0.25, 0.25).finished();

  static UncertaintyBox zero() { return {DeviationVector::Zero()}; }

  bool contains(const DeviationVector& p) const { return (p.array().abs() <= bounds.array()).all(); }
};

void validate(const UncertaintyBox& box);

/// Ellipsoidal outer approximation of the box: diag(bounds^2).
Eigen::Matrix<double, kParamDim, kParamDim> weighting_matrix(const UncertaintyBox& box);

/// i.i.d. uniform samples on [-b_k, b_k]; the same seed always yields the same list.
std::vector<DeviationVector> sample_uniform(const UncertaintyBox& box, std::uint64_t seed, std::size_t count);

}  // namespace chainmpc
