#include "chainmpc/checks.hpp"
#include "chainmpc/sensitivity.hpp"

#include <doctest.h>

#include <random>

using namespace chainmpc;

namespace {

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

StateVector field(const StateVector& x, const InputVector& u, const Params& prm) {
  return vector_field<double>(x, u, prm);
}

}  // namespace

TEST_CASE("state Jacobian structure and finite differences") {
  const Params prm;
  std::mt19937_64 gen(21);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 100; ++t) {
    const StateVector x = random_state(gen);
    const InputVector u = InputVector::NullaryExpr([&]() { return n01(gen); });
    const auto fx = jacobian_fx<double>(x, u, prm);
    CHECK(fx.block<4, 4>(0, 4).isIdentity(0.0));
    CHECK(fx(6, sx::tau1) == doctest::Approx(1.0 / prm.J1));
    CHECK(fx(6, sx::tau2) == 0.0);
    CHECK(fx(7, sx::tau1) == 0.0);

    Eigen::Matrix<double, kStateDim, kStateDim> fd;
    const double h = 1e-6;
    for (int k = 0; k < kStateDim; ++k) {
      StateVector xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      fd.col(k) = (field(xp, u, prm) - field(xm, u, prm)) / (2.0 * h);
    }
    CHECK(rel_err(fx, fd) <= 1e-5);
  }
}

TEST_CASE("parameter Jacobian against differences over the deviations") {
  const Params nom;
  std::mt19937_64 gen(22);
  for (int t = 0; t < 100; ++t) {
    const StateVector x = random_state(gen);
    const InputVector u = InputVector::Zero();
    const auto fp = jacobian_fp<double>(x, u, nom);
    CHECK(fp.bottomRows<4>().isZero(0.0));
    CHECK(fp(6, dp::J1) == doctest::Approx(-x(sx::tau1) / nom.J1));
    CHECK(fp(7, dp::J2) == doctest::Approx(-x(sx::tau2) / nom.J2));

    Eigen::Matrix<double, kStateDim, kParamDim> fd;
    const double h = 1e-6;
    for (int k = 0; k < kParamDim; ++k) {
      DeviationVector d = DeviationVector::Zero();
      d(k) = h;
      fd.col(k) = (field(x, u, apply_deviations(nom, d)) - field(x, u, apply_deviations(nom, -d))) / (2.0 * h);
    }
    CHECK(rel_err(fp, fd) <= 1e-5);
  }
}

TEST_CASE("sensitivity and augmented right-hand sides") {
  const Params nom;
  std::mt19937_64 gen(23);
  const StateVector x = random_state(gen);
  const InputVector u(1.0, -2.0, 0.5, 0.3);
  const Sensitivity zero = Sensitivity::Zero();
  CHECK((sensitivity_rhs<double>(x, u, zero, nom) - jacobian_fp<double>(x, u, nom)).norm() == 0.0);

  // Unactuated pitch with no torque and no thrust still has gravity terms in f_p; a state with zero
  // torque gives zero pitch rows.
  const Sensitivity dPi0 = sensitivity_rhs<double>(x, u, zero, nom);
  CHECK(dPi0.bottomRows<4>().isZero(0.0));

  Sensitivity Pi = Sensitivity::NullaryExpr([&]() { return std::normal_distribution<double>()(gen); });
  const Sensitivity expect = jacobian_fx<double>(x, u, nom) * Pi + jacobian_fp<double>(x, u, nom);
  CHECK((sensitivity_rhs<double>(x, u, Pi, nom) - expect).norm() < 1e-10 * std::max(1.0, expect.norm()));

  const AugmentedVector xa = make_augmented<double>(x, Pi);
  const AugmentedVector da = augmented_rhs<double>(xa, u, nom);
  CHECK((da.head<kStateDim>() - field(x, u, nom)).norm() == 0.0);
  const Sensitivity dPi = sensitivity_rhs<double>(x, u, Pi, nom);
  for (int c = 0; c < kParamDim; ++c) {
    for (int r = 0; r < kStateDim; ++r) CHECK(da(kStateDim + c * kStateDim + r) == dPi(r, c));
  }

  // Equilibrium with Pi = 0.
  StateVector hover = StateVector::Zero();
  hover(sx::phi1) = hover(sx::phi2) = 1.5707963267948966;
  hover(sx::fR1) = nom.m1 * nom.g;
  hover(sx::fR2) = nom.m2 * nom.g;
  const AugmentedVector dh = augmented_rhs<double>(make_augmented<double>(hover, zero), InputVector::Zero(), nom);
  CHECK(dh.head<kStateDim>().norm() < 1e-12);
  const Sensitivity fp = jacobian_fp<double>(hover, InputVector::Zero(), nom);
  CHECK((dh.tail<kSensitivityDim>() - Eigen::Map<const Eigen::Matrix<double, kSensitivityDim, 1>>(fp.data())).norm() ==
        0.0);
}

TEST_CASE("RK4 step") {
  auto zero_rhs = [](const Eigen::Vector3d&, const Eigen::Vector3d&) { return Eigen::Vector3d::Zero().eval(); };
  const Eigen::Vector3d s(1.0, 2.0, 3.0);
  CHECK(rk4_step(zero_rhs, s, s, 0.1) == s);

  using V1 = Eigen::Matrix<double, 1, 1>;
  auto growth = [](const V1& v, const V1&) { return v; };
  const double h = 0.01;
  const double expect = 1.0 + h + h * h / 2.0 + h * h * h / 6.0 + h * h * h * h / 24.0;
  CHECK(rk4_step(growth, V1(1.0), V1(0.0), h)(0) == doctest::Approx(expect).epsilon(1e-15));

  // Local error is O(h^5).
  const Params prm;
  std::mt19937_64 gen(24);
  const StateVector x = random_state(gen);
  const InputVector u(2.0, -1.0, 0.5, 0.0);
  auto fine = [&](double T) {
    StateVector y = x;
    const int n = static_cast<int>(std::lround(T / 1e-5));
    for (int i = 0; i < n; ++i) y = step_state(y, u, prm, T / n);
    return y;
  };
  const double H = 0.04;
  const double e1 = (step_state(x, u, prm, H) - fine(H)).norm();
  const double e2 = (step_state(x, u, prm, H / 2) - fine(H / 2)).norm();
  CHECK(e1 / e2 == doctest::Approx(32.0).epsilon(0.15));
}

TEST_CASE("augmented propagation keeps the state identical to plain propagation") {
  const Params nom;
  std::mt19937_64 gen(25);
  StateVector x = random_state(gen);
  AugmentedVector xa = make_augmented<double>(x, Sensitivity::Zero());
  const InputVector u(1.0, 1.0, -0.5, 0.5);
  for (int k = 0; k < 50; ++k) {
    x = step_state(x, u, nom, 0.01);
    xa = step_augmented(xa, u, nom, 0.01);
  }
  CHECK((xa.head<kStateDim>() - x).norm() <= 1e-13 * x.norm());
}

TEST_CASE("the map from initial to final sensitivity is affine") {
  const Params nom;
  std::mt19937_64 gen(26);
  std::normal_distribution<double> n01;
  const StateVector x0 = random_state(gen);
  const InputVector u(0.5, -0.5, 0.2, -0.2);
  auto propagate = [&](const Sensitivity& Pi0) {
    AugmentedVector xa = make_augmented<double>(x0, Pi0);
    for (int k = 0; k < 40; ++k) xa = step_augmented(xa, u, nom, 0.01);
    return sensitivity_block<double>(xa).eval();
  };
  const Sensitivity P = Sensitivity::NullaryExpr([&]() { return n01(gen); });
  const Sensitivity Q = Sensitivity::NullaryExpr([&]() { return n01(gen); });
  const double a = 0.3, b = -1.7;
  const Sensitivity lhs = propagate(a * P + b * Q + (1.0 - a - b) * Sensitivity::Zero());
  const Sensitivity rhs = a * propagate(P) + b * propagate(Q) + (1.0 - a - b) * propagate(Sensitivity::Zero());
  CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm()));
}

TEST_CASE("discrete step Jacobians match differences of the RK4 map") {
  const Params nom;
  std::mt19937_64 gen(27);
  const double h = 0.01;
  for (int t = 0; t < 20; ++t) {
    const StateVector x = random_state(gen);
    const InputVector u(3.0, -2.0, 1.0, -1.0);
    const StepJacobians J = step_state_jacobians(x, u, nom, h);
    CHECK((J.next - step_state(x, u, nom, h)).norm() < 1e-13);
    Eigen::Matrix<double, kStateDim, kStateDim> A;
    Eigen::Matrix<double, kStateDim, kInputDim> B;
    const double e = 1e-6;
    for (int k = 0; k < kStateDim; ++k) {
      StateVector xp = x, xm = x;
      xp(k) += e;
      xm(k) -= e;
      A.col(k) = (step_state(xp, u, nom, h) - step_state(xm, u, nom, h)) / (2.0 * e);
    }
    for (int k = 0; k < kInputDim; ++k) {
      InputVector up = u, um = u;
      up(k) += e;
      um(k) -= e;
      B.col(k) = (step_state(x, up, nom, h) - step_state(x, um, nom, h)) / (2.0 * e);
    }
    CHECK(rel_err(J.A, A) <= 1e-7);
    CHECK(rel_err(J.B, B) <= 1e-7);

    const Sensitivity Pi = 0.1 * Sensitivity::NullaryExpr([&]() { return std::normal_distribution<double>()(gen); });
    const AugmentedStepJacobians G = step_augmented_jacobians(x, Pi, u, nom, h);
    auto next_pi = [&](const StateVector& xx, const InputVector& uu) {
      return sensitivity_block<double>(step_augmented(make_augmented<double>(xx, Pi), uu, nom, h)).eval();
    };
    CHECK((G.next_pi - next_pi(x, u)).norm() < 1e-12);
    Eigen::Matrix<double, kSensitivityDim, kStateDim> dx;
    for (int k = 0; k < kStateDim; ++k) {
      StateVector xp = x, xm = x;
      xp(k) += e;
      xm(k) -= e;
      const Sensitivity d = (next_pi(xp, u) - next_pi(xm, u)) / (2.0 * e);
      dx.col(k) = Eigen::Map<const Eigen::Matrix<double, kSensitivityDim, 1>>(d.data());
    }
    Eigen::Matrix<double, kSensitivityDim, kInputDim> du;
    for (int k = 0; k < kInputDim; ++k) {
      InputVector up = u, um = u;
      up(k) += e;
      um(k) -= e;
      const Sensitivity d = (next_pi(x, up) - next_pi(x, um)) / (2.0 * e);
      du.col(k) = Eigen::Map<const Eigen::Matrix<double, kSensitivityDim, 1>>(d.data());
    }
    CHECK(rel_err(G.dpi_dx, dx) <= 1e-6);
    CHECK(rel_err(G.dpi_du, du) <= 1e-6);
  }
}

TEST_CASE("sensitivity matches perturbed rollouts over one second") {
  const auto r = check_jacobian(CheckOptions{});
  CAPTURE(r.detail);
  CHECK(r.passed);
}
