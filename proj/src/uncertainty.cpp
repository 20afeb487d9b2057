#include "chainmpc/uncertainty.hpp"

#include <random>

namespace chainmpc {

void validate(const UncertaintyBox& box) {
  for (int k = 0; k < kParamDim; ++k) {
    if (!(box.bounds(k) >= 0.0) || !std::isfinite(box.bounds(k))) {
      throw std::invalid_argument("uncertainty bound " + std::to_string(k) + " must be finite and >= 0");
    }
  }
}

Eigen::Matrix<double, kParamDim, kParamDim> weighting_matrix(const UncertaintyBox& box) {
  validate(box);
  return box.bounds.array().square().matrix().asDiagonal();
}

std::vector<DeviationVector> sample_uniform(const UncertaintyBox& box, std::uint64_t seed, std::size_t count) {
  validate(box);
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  // mt19937_64 bits mapped to [0, 1) by hand so the stream does not depend on
  // the standard library's distribution implementation.
  std::mt19937_64 gen(seed);
  std::vector<DeviationVector> out(count);
  for (auto& p : out) {
    for (int k = 0; k < kParamDim; ++k) {
      const double unit = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      p(k) = box.bounds(k) * (2.0 * unit - 1.0);
    }
  }
  return out;
}

}  // namespace chainmpc
