#include "chainmpc/simulation.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

using namespace chainmpc;

TEST_CASE("initial state") {
  const SimConfig sim;
  const DenseReference dense = build_dense_reference(sim.ellipse, sim.ocp.nominal, sim.fL_d);
  const ReferencePoint r0 = dense.at(0.0);
  StateVector x = initial_state(r0, Eigen::Vector2d::Zero(), sim.ocp.nominal, sim.ocp.boxes);
  CHECK((x.head<2>() - r0.phi_d).norm() == 0.0);
  x = initial_state(r0, sim.e_phi0, sim.ocp.nominal, sim.ocp.boxes);
  CHECK(x(sx::phi1) == doctest::Approx(r0.phi_d(0) - deg2rad(8.0)).epsilon(1e-14));
  CHECK(x(sx::phi2) == doctest::Approx(r0.phi_d(1) + deg2rad(4.0)).epsilon(1e-14));
  CHECK(x(sx::fR1) == doctest::Approx(4.483).epsilon(1e-3));
  CHECK(x(sx::fR2) == doctest::Approx(4.483).epsilon(1e-3));
  CHECK(x.segment<6>(sx::th1).norm() == 0.0);
  CHECK(x.tail<2>().norm() == 0.0);

  BoxSets tight;
  tight.fR_min = 6.0;
  x = initial_state(r0, Eigen::Vector2d::Zero(), sim.ocp.nominal, tight);
  CHECK(x(sx::fR1) == 6.0);
}

TEST_CASE("rate configuration is validated") {
  SimConfig sim;
  sim.plant_dt = 0.003;
  CHECK_THROWS(validate(sim));
  sim.plant_dt = 0.005;
  CHECK(sim.substeps() == 2);
  CHECK(sim.control_steps() == 1200);
}

TEST_CASE("nominal closed loop without uncertainty tracks the reference") {
  SimConfig sim;
  sim.e_phi0.setZero();
  const TrialLog log = run_trial(sim, ControllerMode::nominal);
  REQUIRE(log.rows.size() == 2401);
  CHECK_FALSE(log.diverged);
  CHECK(log.qp_failures == 0);
  CHECK(log.control_steps == 1200);
  CHECK(log.rows.front().t == 0.0);
  CHECK(log.rows.back().t == doctest::Approx(12.0));

  double worst_late = 0.0;
  for (const TrialSample& r : log.rows) {
    if (r.t > 9.0) {
      worst_late = std::max(worst_late, (r.x.head<2>() - r.phi_d).cwiseAbs().maxCoeff());
    }
    CHECK(r.alpha[0] == 0.0);
  }
  CHECK(rad2deg(worst_late) <= 2.0);

  // Inputs are held over the two plant steps of a control period.
  for (std::size_t i = 0; i + 1 < log.rows.size() - 1; i += 2) CHECK(log.rows[i].u == log.rows[i + 1].u);

  std::ostringstream os;
  write_trial_csv(os, log);
  const std::string csv = os.str();
  const std::string header =
      "t,phi1,phi2,th1,th2,dphi1,dphi2,dth1,dth2,fR1,fR2,tau1,tau2,ufR1,ufR2,utau1,utau2,phi1_d,phi2_d,fL1,fL2,"
      "fL1_d,fL2_d,e_phi1,e_phi2,e_fL1,e_fL2,s_delta,s_fR1,s_fR2,alpha_sep,alpha_fR1,alpha_fR2,qp_status,"
      "qp_time_ms\n";
  CHECK(csv.rfind(header, 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2402);
}

TEST_CASE("trials are deterministic apart from timing") {
  SimConfig sim;
  sim.duration = 0.5;
  sim.p_true << 0.1, -0.1, 0.05, -0.05, 0.2, -0.2;
  const TrialLog a = run_trial(sim, ControllerMode::tube);
  const TrialLog b = run_trial(sim, ControllerMode::tube);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].x == b.rows[i].x);
    CHECK(a.rows[i].u == b.rows[i].u);
  }
  CHECK(a.rows.back().alpha[0] > 0.0);
}
