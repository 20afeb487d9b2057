#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace chainmpc {

inline constexpr int kStateDim = 12;
inline constexpr int kInputDim = 4;
inline constexpr int kParamDim = 6;
inline constexpr int kSensitivityDim = kStateDim * kParamDim;
inline constexpr int kAugmentedDim = kStateDim + kSensitivityDim;
inline constexpr int kOutputDim = 8;
inline constexpr int kTerminalOutputDim = 4;

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

/// Extended state [phi1 phi2 th1 th2 dphi1 dphi2 dth1 dth2 fR1 fR2 tau1 tau2].
template <typename Scalar>
using State = Eigen::Matrix<Scalar, kStateDim, 1>;

/// Actuation rates [dfR1 dfR2 dtau1 dtau2].
template <typename Scalar>
using ControlRate = Eigen::Matrix<Scalar, kInputDim, 1>;

/// d(state)/d(deviation), rows in state order, columns in deviation order.
template <typename Scalar>
using SensitivityMatrix = Eigen::Matrix<Scalar, kStateDim, kParamDim>;

/// [x; vec(Pi)] with column-major vec.
template <typename Scalar>
using AugmentedState = Eigen::Matrix<Scalar, kAugmentedDim, 1>;

using StateVector = State<double>;
using InputVector = ControlRate<double>;
using Sensitivity = SensitivityMatrix<double>;
using AugmentedVector = AugmentedState<double>;

/// Relative deviations (d_m1, d_m2, d_l1, d_l2, d_J1, d_J2).
using DeviationVector = Eigen::Matrix<double, kParamDim, 1>;

/// Point or force in the (x_W, z_W) plane, z up.
using PlanarVec = Eigen::Vector2d;

namespace sx {
inline constexpr int phi1 = 0;
inline constexpr int phi2 = 1;
inline constexpr int th1 = 2;
inline constexpr int th2 = 3;
inline constexpr int dphi1 = 4;
inline constexpr int dphi2 = 5;
inline constexpr int dth1 = 6;
inline constexpr int dth2 = 7;
inline constexpr int fR1 = 8;
inline constexpr int fR2 = 9;
inline constexpr int tau1 = 10;
inline constexpr int tau2 = 11;
}  // namespace sx

namespace dp {
inline constexpr int m1 = 0;
inline constexpr int m2 = 1;
inline constexpr int l1 = 2;
inline constexpr int l2 = 3;
inline constexpr int J1 = 4;
inline constexpr int J2 = 5;
}  // namespace dp

template <typename Scalar = double>
struct PhysicalParams {
  Scalar m1{0.457};
  Scalar m2{0.457};
  Scalar l1{0.942};
  Scalar l2{0.942};
  Scalar J1{0.123};
  Scalar J2{0.123};
  Scalar g{9.81};
  static constexpr int n = 2;

  template <typename Other>
  PhysicalParams<Other> cast() const {
    return {Other(m1), Other(m2), Other(l1), Other(l2), Other(J1), Other(J2), Other(g)};
  }
};

using Params = PhysicalParams<double>;

inline void validate(const Params& p) {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("physical parameter '") + name +
                                  "' must be finite and positive, got " + std::to_string(v));
    }
  };
  check(p.m1, "m1");
  check(p.m2, "m2");
  check(p.l1, "l1");
  check(p.l2, "l2");
  check(p.J1, "J1");
  check(p.J2, "J2");
  check(p.g, "g");
}

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  a = std::fmod(a + 0.5 * two_pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - 0.5 * two_pi;
}

inline constexpr double deg2rad(double d) { return d * 0.017453292519943295769236907684886; }
inline constexpr double rad2deg(double r) { return r * 57.295779513082320876798154814105; }

}  // namespace chainmpc
