#pragma once

// Closed-form first derivatives of the chain vector field, the variational
// equation for Pi = dx/dp and the 84-state augmented model.

#include "chainmpc/dynamics.hpp"

namespace chainmpc {

template <typename Scalar>
using StateJacobian = Eigen::Matrix<Scalar, kStateDim, kStateDim>;

template <typename Scalar>
using ParamJacobian = Eigen::Matrix<Scalar, kStateDim, kParamDim>;

/// Partials of phiddot w.r.t. the state and the raw (m1, m2, l1, l2).
template <typename Scalar>
struct AccelerationPartials {
  Vec2<Scalar> phiddot;
  Eigen::Matrix<Scalar, 2, kStateDim> wrt_state;
  Eigen::Matrix<Scalar, 2, 4> wrt_params;
};

// Every partial follows from differentiating M phiddot = Q - b:
//   dphiddot = M^{-1} (dQ - db - dM phiddot).
template <typename Scalar>
AccelerationPartials<Scalar> acceleration_partials(const State<Scalar>& x,
                                                   const PhysicalParams<Scalar>& prm) {
  using std::cos;
  using std::sin;
  const Scalar& phi1 = x(sx::phi1);
  const Scalar& phi2 = x(sx::phi2);
  const Scalar& th1 = x(sx::th1);
  const Scalar& th2 = x(sx::th2);
  const Scalar& w1 = x(sx::dphi1);
  const Scalar& w2 = x(sx::dphi2);
  const Scalar& f1 = x(sx::fR1);
  const Scalar& f2 = x(sx::fR2);
  const Scalar& m1 = prm.m1;
  const Scalar& m2 = prm.m2;
  const Scalar& l1 = prm.l1;
  const Scalar& l2 = prm.l2;
  const Scalar& g = prm.g;

  const Scalar c = cos(phi2 - phi1);
  const Scalar s = sin(phi2 - phi1);
  const Scalar cphi1 = cos(phi1);
  const Scalar cphi2 = cos(phi2);
  const Scalar c1t = cos(phi1 - th1);
  const Scalar s1t = sin(phi1 - th1);
  const Scalar c12 = cos(phi1 - th2);
  const Scalar s12 = sin(phi1 - th2);
  const Scalar c2t = cos(phi2 - th2);
  const Scalar s2t = sin(phi2 - th2);
  const Scalar mt = m1 + m2;
  const Scalar k = m2 * l1 * l2;

  const Scalar M11 = mt * l1 * l1;
  const Scalar M12 = k * c;
  const Scalar M22 = m2 * l2 * l2;
  const Scalar det = M11 * M22 - M12 * M12;
  const Scalar r1 = l1 * (f1 * c1t + f2 * c12) - (-k * s * w2 * w2 + mt * g * l1 * cphi1);
  const Scalar r2 = l2 * f2 * c2t - (k * s * w1 * w1 + m2 * g * l2 * cphi2);

  AccelerationPartials<Scalar> out;
  const Scalar a0 = (M22 * r1 - M12 * r2) / det;
  const Scalar a1 = (M11 * r2 - M12 * r1) / det;
  out.phiddot << a0, a1;

  // Columns of (dQ - db - dM phiddot) before applying M^{-1}.
  Eigen::Matrix<Scalar, 2, kStateDim + 4> v;
  v.setZero();
  const Scalar zero(0.0);
  v.col(sx::phi1) << l1 * (-f1 * s1t - f2 * s12) - (k * c * w2 * w2 - mt * g * l1 * sin(phi1)) - k * s * a1,
      -(-k * c * w1 * w1) - k * s * a0;
  v.col(sx::phi2) << -(-k * c * w2 * w2) + k * s * a1,
      -l2 * f2 * s2t - (k * c * w1 * w1 - m2 * g * l2 * sin(phi2)) + k * s * a0;
  v.col(sx::th1) << l1 * f1 * s1t, zero;
  v.col(sx::th2) << l1 * f2 * s12, l2 * f2 * s2t;
  v.col(sx::dphi1) << zero, Scalar(-2.0) * k * s * w1;
  v.col(sx::dphi2) << Scalar(2.0) * k * s * w2, zero;
  v.col(sx::fR1) << l1 * c1t, zero;
  v.col(sx::fR2) << l1 * c12, l2 * c2t;
  // m1
  v.col(kStateDim + 0) << -g * l1 * cphi1 - l1 * l1 * a0, zero;
  // m2
  v.col(kStateDim + 1) << -(-l1 * l2 * s * w2 * w2 + g * l1 * cphi1) - (l1 * l1 * a0 + l1 * l2 * c * a1),
      -(l1 * l2 * s * w1 * w1 + g * l2 * cphi2) - (l1 * l2 * c * a0 + l2 * l2 * a1);
  // l1
  v.col(kStateDim + 2) << (f1 * c1t + f2 * c12) - (-m2 * l2 * s * w2 * w2 + mt * g * cphi1) -
                              (Scalar(2.0) * mt * l1 * a0 + m2 * l2 * c * a1),
      -(m2 * l2 * s * w1 * w1) - m2 * l2 * c * a0;
  // l2
  v.col(kStateDim + 3) << -(-m2 * l1 * s * w2 * w2) - m2 * l1 * c * a1,
      f2 * c2t - (m2 * l1 * s * w1 * w1 + m2 * g * cphi2) - (m2 * l1 * c * a0 + Scalar(2.0) * m2 * l2 * a1);

  Mat2<Scalar> Minv;
  Minv << M22 / det, -M12 / det, -M12 / det, M11 / det;
  const Eigen::Matrix<Scalar, 2, kStateDim + 4> dv = Minv * v;
  out.wrt_state = dv.template leftCols<kStateDim>();
  out.wrt_params = dv.template rightCols<4>();
  return out;
}

/// f_x = df/dx at (x, u, params).
template <typename Scalar>
StateJacobian<Scalar> jacobian_fx(const State<Scalar>& x, const ControlRate<Scalar>& /*u*/,
                                  const PhysicalParams<Scalar>& prm) {
  const AccelerationPartials<Scalar> ap = acceleration_partials(x, prm);
  StateJacobian<Scalar> fx = StateJacobian<Scalar>::Zero();
  for (int r = 0; r < 4; ++r) fx(r, r + 4) = Scalar(1.0);
  fx.template block<2, kStateDim>(4, 0) = ap.wrt_state;
  fx(6, sx::tau1) = Scalar(1.0) / prm.J1;
  fx(7, sx::tau2) = Scalar(1.0) / prm.J2;
  return fx;
}

/// f_u = df/du; the rates only enter through the actuator integrators.
inline Eigen::Matrix<double, kStateDim, kInputDim> jacobian_fu() {
  Eigen::Matrix<double, kStateDim, kInputDim> fu = Eigen::Matrix<double, kStateDim, kInputDim>::Zero();
  fu.bottomRows<4>().setIdentity();
  return fu;
}

namespace detail {
template <typename Scalar>
ParamJacobian<Scalar> fp_from_partials(const AccelerationPartials<Scalar>& ap, const State<Scalar>& x,
                                       const PhysicalParams<Scalar>& nominal) {
  ParamJacobian<Scalar> fp = ParamJacobian<Scalar>::Zero();
  // Chain rule through m_j = (1 + d) m_Rj evaluated at d = 0.
  fp(4, dp::m1) = ap.wrt_params(0, 0) * nominal.m1;
  fp(5, dp::m1) = ap.wrt_params(1, 0) * nominal.m1;
  fp(4, dp::m2) = ap.wrt_params(0, 1) * nominal.m2;
  fp(5, dp::m2) = ap.wrt_params(1, 1) * nominal.m2;
  fp(4, dp::l1) = ap.wrt_params(0, 2) * nominal.l1;
  fp(5, dp::l1) = ap.wrt_params(1, 2) * nominal.l1;
  fp(4, dp::l2) = ap.wrt_params(0, 3) * nominal.l2;
  fp(5, dp::l2) = ap.wrt_params(1, 3) * nominal.l2;
  fp(6, dp::J1) = -x(sx::tau1) / nominal.J1;
  fp(7, dp::J2) = -x(sx::tau2) / nominal.J2;
  return fp;
}
}  // namespace detail

/// f_p = df/dp w.r.t. the relative deviations, evaluated at p = 0.
template <typename Scalar>
ParamJacobian<Scalar> jacobian_fp(const State<Scalar>& x, const ControlRate<Scalar>& /*u*/,
                                  const PhysicalParams<Scalar>& nominal) {
  return detail::fp_from_partials(acceleration_partials(x, nominal), x, nominal);
}

/// Pidot = f_x Pi + f_p, using the sparsity of f_x.
template <typename Scalar>
SensitivityMatrix<Scalar> sensitivity_rhs(const State<Scalar>& x, const ControlRate<Scalar>& /*u*/,
                                          const SensitivityMatrix<Scalar>& Pi,
                                          const PhysicalParams<Scalar>& nominal) {
  const AccelerationPartials<Scalar> ap = acceleration_partials(x, nominal);
  SensitivityMatrix<Scalar> dPi = detail::fp_from_partials(ap, x, nominal);
  dPi.template topRows<4>() += Pi.template middleRows<4>(4);
  dPi.template middleRows<2>(4) += ap.wrt_state * Pi;
  dPi.row(6) += Pi.row(sx::tau1) / nominal.J1;
  dPi.row(7) += Pi.row(sx::tau2) / nominal.J2;
  return dPi;
}

template <typename Scalar>
SensitivityMatrix<Scalar> sensitivity_block(const AugmentedState<Scalar>& xa) {
  return Eigen::Map<const SensitivityMatrix<Scalar>>(xa.data() + kStateDim);
}

template <typename Scalar>
AugmentedState<Scalar> make_augmented(const State<Scalar>& x, const SensitivityMatrix<Scalar>& Pi) {
  AugmentedState<Scalar> xa;
  xa.template head<kStateDim>() = x;
  Eigen::Map<SensitivityMatrix<Scalar>>(xa.data() + kStateDim) = Pi;
  return xa;
}

/// [f(x, u, p0); vec(f_x Pi + f_p)].
template <typename Scalar>
AugmentedState<Scalar> augmented_rhs(const AugmentedState<Scalar>& xa, const ControlRate<Scalar>& u,
                                     const PhysicalParams<Scalar>& nominal) {
  const State<Scalar> x = xa.template head<kStateDim>();
  AugmentedState<Scalar> out;
  out.template head<kStateDim>() = vector_field(x, u, nominal);
  Eigen::Map<SensitivityMatrix<Scalar>>(out.data() + kStateDim) =
      sensitivity_rhs(x, u, sensitivity_block(xa), nominal);
  return out;
}

/// Classical fourth-order Runge-Kutta step with u held over the step.
template <typename Rhs, typename Vector, typename Input>
Vector rk4_step(Rhs&& rhs, const Vector& s, const Input& u, double h) {
  using Scalar = typename Vector::Scalar;
  const Scalar half(0.5 * h);
  const Scalar full(h);
  const Scalar sixth(h / 6.0);
  const Scalar two(2.0);
  const Vector k1 = rhs(s, u);
  const Vector k2 = rhs(Vector(s + half * k1), u);
  const Vector k3 = rhs(Vector(s + half * k2), u);
  const Vector k4 = rhs(Vector(s + full * k3), u);
  return s + sixth * (k1 + two * k2 + two * k3 + k4);
}

/// One RK4 step of the chain model.
inline StateVector step_state(const StateVector& x, const InputVector& u, const Params& prm, double h) {
  return rk4_step([&prm](const StateVector& s, const InputVector& v) { return vector_field(s, v, prm); },
                  x, u, h);
}

/// One RK4 step of the augmented model, the pair (F, F_Pi).
inline AugmentedVector step_augmented(const AugmentedVector& xa, const InputVector& u, const Params& nominal,
                                      double h) {
  return rk4_step(
      [&nominal](const AugmentedVector& s, const InputVector& v) { return augmented_rhs(s, v, nominal); }, xa,
      u, h);
}

/// F(x, u) and its exact derivatives A = dF/dx, B = dF/du.
struct StepJacobians {
  StateVector next;
  Eigen::Matrix<double, kStateDim, kStateDim> A;
  Eigen::Matrix<double, kStateDim, kInputDim> B;
};

StepJacobians step_state_jacobians(const StateVector& x, const InputVector& u, const Params& prm, double h);

/// Augmented step plus the second-order blocks dPi+/dx and dPi+/du (vec layout).
/// dPi+/dPi equals kron(I_6, A) exactly and is not formed.
struct AugmentedStepJacobians {
  StepJacobians state;
  Sensitivity next_pi;
  Eigen::Matrix<double, kSensitivityDim, kStateDim> dpi_dx;
  Eigen::Matrix<double, kSensitivityDim, kInputDim> dpi_du;
};

AugmentedStepJacobians step_augmented_jacobians(const StateVector& x, const Sensitivity& Pi,
                                                const InputVector& u, const Params& nominal, double h);

}  // namespace chainmpc
