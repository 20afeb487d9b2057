#include "chainmpc/sensitivity.hpp"

#include <unsupported/Eigen/AutoDiff>

namespace chainmpc {

namespace {

constexpr int kDirs = kStateDim + kInputDim;
using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, kDirs, 1>>;
using DirMatrix = Eigen::Matrix<double, kStateDim, kDirs>;

}  // namespace

StepJacobians step_state_jacobians(const StateVector& x, const InputVector& u, const Params& prm, double h) {
  // Differentiate each RK4 stage: with x_s = x + c h k_{s-1},
  // dk_s = f_x(x_s) dx_s + f_u [0 I].
  const auto fu = jacobian_fu();
  DirMatrix seed = DirMatrix::Zero();
  seed.leftCols<kStateDim>().setIdentity();

  auto stage = [&](const StateVector& xs, const DirMatrix& dxs, StateVector& k, DirMatrix& dk) {
    k = vector_field(xs, u, prm);
    dk.noalias() = jacobian_fx(xs, u, prm) * dxs;
    dk.rightCols<kInputDim>() += fu;
  };

  StateVector k1, k2, k3, k4;
  DirMatrix d1, d2, d3, d4;
  stage(x, seed, k1, d1);
  stage(StateVector(x + (0.5 * h) * k1), DirMatrix(seed + (0.5 * h) * d1), k2, d2);
  stage(StateVector(x + (0.5 * h) * k2), DirMatrix(seed + (0.5 * h) * d2), k3, d3);
  stage(StateVector(x + h * k3), DirMatrix(seed + h * d3), k4, d4);

  StepJacobians out;
  out.next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const DirMatrix d = seed + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
  out.A = d.leftCols<kStateDim>();
  out.B = d.rightCols<kInputDim>();
  return out;
}

AugmentedStepJacobians step_augmented_jacobians(const StateVector& x, const Sensitivity& Pi,
                                                const InputVector& u, const Params& nominal, double h) {
  AugmentedStepJacobians out;
  out.state = step_state_jacobians(x, u, nominal, h);

  // Second-order terms: forward-mode duals through the closed-form f_x, f_p.
  using DualInput = ControlRate<Dual>;
  using DualAug = AugmentedState<Dual>;
  const PhysicalParams<Dual> prm = nominal.cast<Dual>();

  DualAug xa;
  for (int i = 0; i < kStateDim; ++i) {
    xa(i) = Dual(x(i), kDirs, i);
  }
  for (int i = 0; i < kSensitivityDim; ++i) {
    xa(kStateDim + i) = Dual(Pi.data()[i], Eigen::Matrix<double, kDirs, 1>::Zero());
  }
  DualInput ud;
  for (int i = 0; i < kInputDim; ++i) {
    ud(i) = Dual(u(i), kDirs, kStateDim + i);
  }

  const DualAug next = rk4_step(
      [&prm](const DualAug& s, const DualInput& v) { return augmented_rhs<Dual>(s, v, prm); }, xa, ud, h);

  for (int i = 0; i < kSensitivityDim; ++i) {
    const Dual& e = next(kStateDim + i);
    out.next_pi.data()[i] = e.value();
    out.dpi_dx.row(i) = e.derivatives().head<kStateDim>().transpose();
    out.dpi_du.row(i) = e.derivatives().tail<kInputDim>().transpose();
  }
  return out;
}

}  // namespace chainmpc
