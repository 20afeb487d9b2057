#pragma once

#include "chainmpc/ocp.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace chainmpc {

struct SimConfig {
  /// Plant integration step; the control period Ts must be an integer multiple.
  double plant_dt{0.005};
  double duration{12.0};
  /// Initial elevation offsets from the reference [rad].
  Eigen::Vector2d e_phi0{deg2rad(-8.0), deg2rad(4.0)};
  /// Deviations of the simulated plant from the nominal model.
  DeviationVector p_true = DeviationVector::Zero();
  /// Sensitivity at the first sample.
  Sensitivity Pi0 = Sensitivity::Zero();
  Eigen::Vector2d fL_d{10.0, 10.0};
  EllipseSpec ellipse;
  OcpConfig ocp;

  int substeps() const;
  int control_steps() const;
};

void validate(const SimConfig& sim);

/// phi = phi_d(0) + e_phi0, zero rates and pitch, hover-sized thrust clipped to the box, zero torque.
StateVector initial_state(const ReferencePoint& r0, const Eigen::Vector2d& e_phi0, const Params& nominal,
                          const BoxSets& boxes);

/// One plant-rate row. Controller quantities are held between updates.
struct TrialSample {
  double t{0.0};
  StateVector x = StateVector::Zero();
  InputVector u = InputVector::Zero();
  Eigen::Vector2d phi_d = Eigen::Vector2d::Zero();
  Eigen::Vector2d fL = Eigen::Vector2d::Zero();
  Eigen::Vector2d fL_d = Eigen::Vector2d::Zero();
  SignedResiduals s;
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  QpStatus qp_status{QpStatus::solved};
  double qp_time_ms{0.0};
};

struct TrialLog {
  ControllerMode mode{ControllerMode::nominal};
  DeviationVector p_true = DeviationVector::Zero();
  std::vector<TrialSample> rows;
  int control_steps{0};
  int qp_failures{0};
  /// The plant state became non-finite; the log stops at that point.
  bool diverged{false};
  std::vector<double> solve_times_ms;
};

/// Receding-horizon closed loop against the deviated plant.
TrialLog run_trial(const SimConfig& sim, ControllerMode mode);

/// Column order: t, phi1, phi2, th1, th2, dphi1, dphi2, dth1, dth2, fR1, fR2, tau1, tau2, ufR1, ufR2,
/// utau1, utau2, phi1_d, phi2_d, fL1, fL2, fL1_d, fL2_d, e_phi1, e_phi2, e_fL1, e_fL2, s_delta, s_fR1,
/// s_fR2, alpha_sep, alpha_fR1, alpha_fR2, qp_status, qp_time_ms. Angles in degrees.
void write_trial_csv(std::ostream& os, const TrialLog& log);

}  // namespace chainmpc
