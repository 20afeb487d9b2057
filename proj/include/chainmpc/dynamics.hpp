#pragma once

// Planar two-vehicle chain anchored at the origin. Links are massless and rigid,
// joints are passive pins, vehicles are point masses with an independent pitch
// inertia. z_W points up, gravity is (0, -g), thrust of vehicle j acts along
// t_j = (-sin th_j, cos th_j).

#include "chainmpc/types.hpp"

#include <cmath>

namespace chainmpc {

/// Scales the nominal parameters by (1 + d). Throws if any result is non-positive.
inline Params apply_deviations(const Params& nominal, const DeviationVector& d) {
  Params out = nominal;
  out.m1 = (1.0 + d(dp::m1)) * nominal.m1;
  out.m2 = (1.0 + d(dp::m2)) * nominal.m2;
  out.l1 = (1.0 + d(dp::l1)) * nominal.l1;
  out.l2 = (1.0 + d(dp::l2)) * nominal.l2;
  out.J1 = (1.0 + d(dp::J1)) * nominal.J1;
  out.J2 = (1.0 + d(dp::J2)) * nominal.J2;
  validate(out);
  return out;
}

template <typename Scalar>
Vec2<Scalar> unit_direction(const Scalar& angle) {
  using std::cos;
  using std::sin;
  return Vec2<Scalar>(cos(angle), sin(angle));
}

/// Thrust direction of a vehicle with pitch th.
template <typename Scalar>
Vec2<Scalar> thrust_direction(const Scalar& th) {
  using std::cos;
  using std::sin;
  return Vec2<Scalar>(-sin(th), cos(th));
}

template <typename Scalar>
struct ChainPositions {
  Vec2<Scalar> p1;
  Vec2<Scalar> p2;
};

template <typename Scalar>
ChainPositions<Scalar> forward_kinematics(const Scalar& phi1, const Scalar& phi2,
                                          const PhysicalParams<Scalar>& prm) {
  ChainPositions<Scalar> out;
  out.p1 = prm.l1 * unit_direction(phi1);
  out.p2 = out.p1 + prm.l2 * unit_direction(phi2);
  return out;
}

template <typename Scalar>
Mat2<Scalar> mass_matrix(const Scalar& phi1, const Scalar& phi2, const PhysicalParams<Scalar>& prm) {
  using std::cos;
  const Scalar off = prm.m2 * prm.l1 * prm.l2 * cos(phi2 - phi1);
  Mat2<Scalar> M;
  M << (prm.m1 + prm.m2) * prm.l1 * prm.l1, off, off, prm.m2 * prm.l2 * prm.l2;
  return M;
}

/// Coriolis/centrifugal matrix C with Mdot - 2C skew-symmetric.
template <typename Scalar>
Mat2<Scalar> coriolis_matrix(const Scalar& phi1, const Scalar& phi2, const Scalar& dphi1,
                             const Scalar& dphi2, const PhysicalParams<Scalar>& prm) {
  using std::sin;
  const Scalar ks = prm.m2 * prm.l1 * prm.l2 * sin(phi2 - phi1);
  Mat2<Scalar> C;
  C << Scalar(0.0), -ks * dphi2, ks * dphi1, Scalar(0.0);
  return C;
}

/// C(q, qdot) qdot + G(q).
template <typename Scalar>
Vec2<Scalar> bias_terms(const Scalar& phi1, const Scalar& phi2, const Scalar& dphi1,
                        const Scalar& dphi2, const PhysicalParams<Scalar>& prm) {
  using std::cos;
  using std::sin;
  const Scalar ks = prm.m2 * prm.l1 * prm.l2 * sin(phi2 - phi1);
  return Vec2<Scalar>(-ks * dphi2 * dphi2 + (prm.m1 + prm.m2) * prm.g * prm.l1 * cos(phi1),
                      ks * dphi1 * dphi1 + prm.m2 * prm.g * prm.l2 * cos(phi2));
}

/// Generalized forces of the two thrust vectors on (phi1, phi2).
template <typename Scalar>
Vec2<Scalar> generalized_thrust(const Scalar& phi1, const Scalar& phi2, const Scalar& th1,
                                const Scalar& th2, const Scalar& fR1, const Scalar& fR2,
                                const PhysicalParams<Scalar>& prm) {
  using std::cos;
  return Vec2<Scalar>(prm.l1 * (fR1 * cos(phi1 - th1) + fR2 * cos(phi1 - th2)),
                      prm.l2 * fR2 * cos(phi2 - th2));
}

template <typename Scalar>
struct Accelerations {
  Vec2<Scalar> phi;
  Vec2<Scalar> th;
};

/// Solves M phiddot = Q - bias; pitch is decoupled, thddot_j = tau_j / J_j.
template <typename Scalar>
Accelerations<Scalar> accelerations(const State<Scalar>& x, const PhysicalParams<Scalar>& prm) {
  const Mat2<Scalar> M = mass_matrix(x(sx::phi1), x(sx::phi2), prm);
  const Vec2<Scalar> rhs =
      generalized_thrust(x(sx::phi1), x(sx::phi2), x(sx::th1), x(sx::th2), x(sx::fR1), x(sx::fR2), prm) -
      bias_terms(x(sx::phi1), x(sx::phi2), x(sx::dphi1), x(sx::dphi2), prm);
  // 2x2 solve written out so that dual-number scalars pass through.
  const Scalar det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  Accelerations<Scalar> a;
  a.phi(0) = (M(1, 1) * rhs(0) - M(0, 1) * rhs(1)) / det;
  a.phi(1) = (M(0, 0) * rhs(1) - M(1, 0) * rhs(0)) / det;
  a.th(0) = x(sx::tau1) / prm.J1;
  a.th(1) = x(sx::tau2) / prm.J2;
  return a;
}

/// xdot = [phidot; thdot; phiddot; thddot; u_f; u_tau].
template <typename Scalar>
State<Scalar> vector_field(const State<Scalar>& x, const ControlRate<Scalar>& u,
                           const PhysicalParams<Scalar>& prm) {
  const Accelerations<Scalar> a = accelerations(x, prm);
  State<Scalar> xdot;
  xdot.template segment<4>(0) = x.template segment<4>(4);
  xdot.template segment<2>(4) = a.phi;
  xdot.template segment<2>(6) = a.th;
  xdot.template segment<4>(8) = u;
  return xdot;
}

template <typename Scalar>
struct ChainMotion {
  ChainPositions<Scalar> pos;
  Vec2<Scalar> v1, v2;
  Vec2<Scalar> a1, a2;
};

/// Vehicle positions, velocities and accelerations implied by the state.
template <typename Scalar>
ChainMotion<Scalar> chain_motion(const State<Scalar>& x, const PhysicalParams<Scalar>& prm) {
  const Accelerations<Scalar> acc = accelerations(x, prm);
  const Vec2<Scalar> e1 = unit_direction(x(sx::phi1));
  const Vec2<Scalar> e2 = unit_direction(x(sx::phi2));
  const Vec2<Scalar> n1(-e1(1), e1(0));
  const Vec2<Scalar> n2(-e2(1), e2(0));
  const Scalar w1 = x(sx::dphi1);
  const Scalar w2 = x(sx::dphi2);
  ChainMotion<Scalar> m;
  m.pos.p1 = prm.l1 * e1;
  m.pos.p2 = m.pos.p1 + prm.l2 * e2;
  m.v1 = prm.l1 * w1 * n1;
  m.v2 = m.v1 + prm.l2 * w2 * n2;
  m.a1 = prm.l1 * (acc.phi(0) * n1 - w1 * w1 * e1);
  m.a2 = m.a1 + prm.l2 * (acc.phi(1) * n2 - w2 * w2 * e2);
  return m;
}

/// Axial link forces (positive = tension) from a Newton balance on each vehicle.
template <typename Scalar>
Vec2<Scalar> link_stresses(const State<Scalar>& x, const PhysicalParams<Scalar>& prm) {
  const ChainMotion<Scalar> m = chain_motion(x, prm);
  const Vec2<Scalar> gvec(Scalar(0.0), -prm.g);
  const Vec2<Scalar> t1 = thrust_direction(x(sx::th1));
  const Vec2<Scalar> t2 = thrust_direction(x(sx::th2));
  const Vec2<Scalar> along2 = (m.pos.p2 - m.pos.p1) / prm.l2;  // from vehicle 1 toward vehicle 2
  const Vec2<Scalar> u2 = -along2;
  const Vec2<Scalar> u1 = -m.pos.p1 / prm.l1;
  const Scalar fL2 = u2.dot(prm.m2 * m.a2 - x(sx::fR2) * t2 - prm.m2 * gvec);
  const Scalar fL1 = u1.dot(prm.m1 * m.a1 - x(sx::fR1) * t1 - prm.m1 * gvec - fL2 * along2);
  return Vec2<Scalar>(fL1, fL2);
}

/// Total mechanical energy: kinetic (links + pitch) plus gravitational potential.
template <typename Scalar>
Scalar mechanical_energy(const State<Scalar>& x, const PhysicalParams<Scalar>& prm) {
  using std::sin;
  const Vec2<Scalar> qd = x.template segment<2>(sx::dphi1);
  const Mat2<Scalar> M = mass_matrix(x(sx::phi1), x(sx::phi2), prm);
  const Scalar z1 = prm.l1 * sin(x(sx::phi1));
  const Scalar z2 = z1 + prm.l2 * sin(x(sx::phi2));
  return Scalar(0.5) * qd.dot(M * qd) + Scalar(0.5) * prm.J1 * x(sx::dth1) * x(sx::dth1) +
         Scalar(0.5) * prm.J2 * x(sx::dth2) * x(sx::dth2) + prm.g * (prm.m1 * z1 + prm.m2 * z2);
}

/// Power delivered by thrusts and body torques.
template <typename Scalar>
Scalar actuation_power(const State<Scalar>& x, const PhysicalParams<Scalar>& prm) {
  const ChainMotion<Scalar> m = chain_motion(x, prm);
  return x(sx::fR1) * thrust_direction(x(sx::th1)).dot(m.v1) +
         x(sx::fR2) * thrust_direction(x(sx::th2)).dot(m.v2) + x(sx::tau1) * x(sx::dth1) +
         x(sx::tau2) * x(sx::dth2);
}

}  // namespace chainmpc
