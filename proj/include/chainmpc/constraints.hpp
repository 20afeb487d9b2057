#pragma once

#include "chainmpc/types.hpp"

namespace chainmpc {

enum class ConstraintKind { separation, thrust_upper_1, thrust_upper_2, thrust_lower_1, thrust_lower_2 };

/// Scalar path constraint y(x) <= y_max, optionally tightened by alpha_y.
struct ConstraintSpec {
  ConstraintKind kind{ConstraintKind::separation};
  double y_max{0.0};
  bool tightened{false};
};

/// cos(phi2 - phi1) <= cos(dphi_min), dphi_min in (0, pi).
ConstraintSpec make_separation(double dphi_min, bool tightened);
/// f_Rj <= f_max (j = 1, 2).
ConstraintSpec make_thrust_upper(int vehicle, double f_max, bool tightened);
/// -f_Rj <= -f_min (j = 1, 2).
ConstraintSpec make_thrust_lower(int vehicle, double f_min, bool tightened);

/// Box sets: thrust and torque magnitudes (states) and their rates (inputs).
struct BoxSets {
  double fR_min{3.0};
  double fR_max{20.0};
  double tau_min{-5.0};
  double tau_max{5.0};
  double dfR_min{-200.0};
  double dfR_max{200.0};
  double dtau_min{-100.0};
  double dtau_max{100.0};

  InputVector input_lower() const { return InputVector(dfR_min, dfR_min, dtau_min, dtau_min); }
  InputVector input_upper() const { return InputVector(dfR_max, dfR_max, dtau_max, dtau_max); }
};

void validate(const BoxSets& sets);

using RowVector12 = Eigen::Matrix<double, 1, kStateDim>;
using RowVector6 = Eigen::Matrix<double, 1, kParamDim>;
using WeightMatrix = Eigen::Matrix<double, kParamDim, kParamDim>;

double separation_value(const StateVector& x);

/// y(x) for the given constraint.
double constraint_value(const ConstraintSpec& spec, const StateVector& x);

/// J_yx = dy/dx.
RowVector12 constraint_state_jacobian(const ConstraintSpec& spec, const StateVector& x);

/// Pi_y = J_yx Pi (state-only constraints, J_yp = 0).
RowVector6 constraint_sensitivity(const ConstraintSpec& spec, const StateVector& x, const Sensitivity& Pi);

/// alpha_y = sqrt(Pi_y W Pi_y^T + eps_s^2).
double tightening_margin(const RowVector6& Pi_y, const WeightMatrix& W, double eps_s);

/// y(x) + alpha - y_max in tube mode, y(x) - y_max otherwise. <= 0 means feasible.
double tightened_residual(const ConstraintSpec& spec, const StateVector& x, const Sensitivity& Pi,
                          const WeightMatrix& W, double eps_s);

/// Residual with its gradient w.r.t. x and Pi, used by the transcription.
struct ConstraintLinearization {
  double residual{0.0};
  double alpha{0.0};
  RowVector12 d_x = RowVector12::Zero();
  Sensitivity d_pi = Sensitivity::Zero();
};

ConstraintLinearization linearize_constraint(const ConstraintSpec& spec, const StateVector& x,
                                             const Sensitivity& Pi, const WeightMatrix& W, double eps_s);

struct SignedResiduals {
  double s_delta{0.0};
  double s_fR1{0.0};
  double s_fR2{0.0};
};

/// Reporting residuals on the true state: <= 0 satisfied, = 0 active.
SignedResiduals signed_residuals(const StateVector& x, double dphi_min, double fR_max);

}  // namespace chainmpc
