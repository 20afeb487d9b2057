#include "chainmpc/dynamics.hpp"
#include "chainmpc/reference.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <string>

using namespace chainmpc;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("quintic phase law") {
  const double T = 12.0;
  PhaseSample p = quintic_phase(0.0, T);
  CHECK(p.nu == 0.0);
  CHECK(p.dnu == 0.0);
  CHECK(p.ddnu == 0.0);
  p = quintic_phase(T, T);
  CHECK(p.nu == doctest::Approx(2.0 * kPi).epsilon(1e-15));
  CHECK(p.dnu == 0.0);
  CHECK(p.ddnu == 0.0);
  p = quintic_phase(0.5 * T, T);
  CHECK(p.nu == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(p.dnu == doctest::Approx(2.0 * kPi * 15.0 / 8.0 / T).epsilon(1e-14));
  CHECK(std::abs(p.ddnu) < 1e-14);
  CHECK(quintic_phase(-1.0, T).nu == 0.0);
  CHECK(quintic_phase(T + 1.0, T).nu == doctest::Approx(2.0 * kPi));

  // Derivatives against differences.
  for (double t = 0.5; t < T; t += 1.3) {
    const double h = 1e-5;
    CHECK(quintic_phase(t, T).dnu ==
          doctest::Approx((quintic_phase(t + h, T).nu - quintic_phase(t - h, T).nu) / (2 * h)).epsilon(1e-8));
    CHECK(quintic_phase(t, T).ddnu ==
          doctest::Approx((quintic_phase(t + h, T).dnu - quintic_phase(t - h, T).dnu) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("ellipse points") {
  const EllipseSpec spec;
  PathSample s = ellipse_point(spec, {0.0, 0.0, 0.0});
  CHECK(s.pos.x() == doctest::Approx(0.55));
  CHECK(s.pos.y() == doctest::Approx(1.05));
  CHECK(s.vel.norm() == 0.0);
  s = ellipse_point(spec, {0.5 * kPi, 0.0, 0.0});
  CHECK(std::abs(s.pos.x()) < 1e-15);
  CHECK(s.pos.y() == doctest::Approx(1.40));
  s = ellipse_point(spec, {0.3, 0.7, -0.2});
  const PathSample a = ellipse_point(spec, {0.3 + 1e-6 * 0.7, 0.0, 0.0});
  const PathSample b = ellipse_point(spec, {0.3 - 1e-6 * 0.7, 0.0, 0.0});
  CHECK((s.vel - (a.pos - b.pos) / 2e-6).norm() < 1e-8);
}

TEST_CASE("two-link inverse kinematics") {
  const Params prm;
  Eigen::Vector2d q = two_link_ik(PlanarVec(0.0, prm.l1 + prm.l2), prm, ElbowBranch::positive);
  CHECK(q(0) == doctest::Approx(0.5 * kPi).epsilon(1e-7));
  CHECK(q(1) == doctest::Approx(0.5 * kPi).epsilon(1e-7));
  q = two_link_ik(PlanarVec(prm.l1, prm.l2), prm, ElbowBranch::positive);
  CHECK(std::abs(q(0)) < 1e-12);
  CHECK(q(1) == doctest::Approx(0.5 * kPi).epsilon(1e-12));

  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> r(0.05, 1.85), a(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const double rho = r(gen), ang = a(gen);
    const PlanarVec target(rho * std::cos(ang), rho * std::sin(ang));
    for (ElbowBranch br : {ElbowBranch::positive, ElbowBranch::negative}) {
      const Eigen::Vector2d sol = two_link_ik(target, prm, br);
      CHECK((forward_kinematics(sol(0), sol(1), prm).p2 - target).norm() <= 1e-10);
      CHECK((br == ElbowBranch::positive ? std::sin(sol(1) - sol(0)) >= 0.0 : std::sin(sol(1) - sol(0)) <= 0.0));
    }
  }

  try {
    two_link_ik(PlanarVec(0.0, 1.9), prm, ElbowBranch::positive, 0.02);
    FAIL("expected UnreachableTarget");
  } catch (const UnreachableTarget& e) {
    CHECK(e.rho == doctest::Approx(1.9));
    CHECK(e.rho_max == doctest::Approx(1.864));
    CHECK(std::string(e.what()).find("1.9") != std::string::npos);
  }
}

TEST_CASE("inverse-kinematics rates") {
  const Params prm;
  const Eigen::Vector2d q(0.4, 1.5);
  const IkRates zero = ik_derivatives(q, PlanarVec::Zero(), PlanarVec::Zero(), prm);
  CHECK(zero.dphi.norm() == 0.0);
  CHECK(zero.ddphi.norm() == 0.0);
  CHECK_THROWS_AS(ik_derivatives(Eigen::Vector2d(0.7, 0.7), PlanarVec(0.1, 0.0), PlanarVec::Zero(), prm),
                  std::domain_error);
  CHECK_THROWS_AS(ik_derivatives(Eigen::Vector2d(0.7, 0.7 + kPi), PlanarVec(0.1, 0.0), PlanarVec::Zero(), prm),
                  std::domain_error);

  // Circular path of radius 1.2 at angular rate w.
  const double R = 1.2, w = 0.8;
  auto target = [&](double t) { return PlanarVec(R * std::cos(w * t + 0.6), R * std::sin(w * t + 0.6)); };
  for (double t = 0.0; t < 3.0; t += 0.37) {
    const double h = 1e-5;
    const Eigen::Vector2d qt = two_link_ik(target(t), prm, ElbowBranch::positive);
    const PlanarVec vel = (target(t + h) - target(t - h)) / (2 * h);
    const PlanarVec acc = -w * w * target(t);
    const IkRates rates = ik_derivatives(qt, vel, acc, prm);
    const Eigen::Vector2d fd =
        (two_link_ik(target(t + h), prm, ElbowBranch::positive) - two_link_ik(target(t - h), prm, ElbowBranch::positive)) /
        (2 * h);
    CHECK((rates.dphi - fd).norm() <= 1e-6);
    const IkRates rp = ik_derivatives(two_link_ik(target(t + h), prm, ElbowBranch::positive),
                                      (target(t + 2 * h) - target(t)) / (2 * h), acc, prm);
    const IkRates rm = ik_derivatives(two_link_ik(target(t - h), prm, ElbowBranch::positive),
                                      (target(t) - target(t - 2 * h)) / (2 * h), acc, prm);
    CHECK((rates.ddphi - (rp.dphi - rm.dphi) / (2 * h)).norm() <= 1e-4);
  }
}

TEST_CASE("dense reference") {
  const Params prm;
  const EllipseSpec spec;
  const DenseReference d = build_dense_reference(spec, prm, Eigen::Vector2d(10.0, 10.0));
  REQUIRE(d.t.size() == 2401);
  CHECK(d.t.back() == doctest::Approx(12.0));
  double max_jump = 0.0;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    const double rho = d.position[i].norm();
    CHECK(rho >= std::abs(prm.l1 - prm.l2) + spec.eps_r);
    CHECK(rho <= prm.l1 + prm.l2 - spec.eps_r);
    CHECK(d.points[i].fL_d == Eigen::Vector2d(10.0, 10.0));
    CHECK((forward_kinematics(d.points[i].phi_d(0), d.points[i].phi_d(1), prm).p2 - d.position[i]).norm() <= 1e-10);
    if (i > 0) max_jump = std::max(max_jump, (d.points[i].phi_d - d.points[i - 1].phi_d).cwiseAbs().maxCoeff());
  }
  CHECK(max_jump < 0.01);
  CHECK(d.points.front().phi_d(1) > d.points.front().phi_d(0));
  CHECK(d.points.front().dphi_d.norm() == 0.0);
  CHECK(d.points.back().dphi_d.norm() < 1e-12);

  std::ostringstream os;
  write_reference_csv(os, d);
  const std::string csv = os.str();
  CHECK(csv.rfind("t,x_d,z_d,phi1_d,phi2_d,dphi1_d,dphi2_d,ddphi1_d,ddphi2_d,fL1_d,fL2_d\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2402);
}

TEST_CASE("unreachable ellipse is rejected") {
  EllipseSpec spec;
  spec.ax = 3.0;
  CHECK_THROWS_AS(build_dense_reference(spec, Params{}, Eigen::Vector2d(10.0, 10.0)), UnreachableTarget);
}

TEST_CASE("horizon references") {
  const Params prm;
  const EllipseSpec spec;
  const DenseReference d = build_dense_reference(spec, prm, Eigen::Vector2d(10.0, 10.0));
  const HorizonReference h = build_reference(d, 1.0, 0.01, 30);
  CHECK(h.stages.size() == 30);
  CHECK(h.terminal.size() == 4);
  const ReferencePoint last = d.at(1.0 + 30 * 0.01);
  CHECK((h.terminal.head<2>() - last.phi_d).norm() < 1e-14);
  CHECK((h.terminal.tail<2>() - last.fL_d).norm() == 0.0);
  CHECK(h.stages[0].stage().size() == 8);
  CHECK(h.stages[0].stage()(2) == 10.0);

  const HorizonReference next = build_reference(d, 1.01, 0.01, 30);
  for (int i = 0; i + 1 < 30; ++i) CHECK((next.stages[i].stage() - h.stages[i + 1].stage()).norm() < 1e-12);

  const HorizonReference end = build_reference(d, 13.0, 0.01, 30);
  for (const ReferencePoint& r : end.stages) {
    CHECK((r.phi_d - d.points.back().phi_d).norm() < 1e-14);
    CHECK(r.dphi_d.norm() < 1e-12);
  }

  const HorizonReference direct = build_reference(spec, prm, Eigen::Vector2d(10.0, 10.0), 1.0, 0.01, 30);
  CHECK((direct.stages[7].stage() - h.stages[7].stage()).norm() < 1e-12);
}
