#include "chainmpc/constraints.hpp"

#include <cmath>
#include <numbers>

namespace chainmpc {

ConstraintSpec make_separation(double dphi_min, bool tightened) {
  if (!(dphi_min > 0.0 && dphi_min < std::numbers::pi)) {
    throw std::invalid_argument("separation threshold must lie in (0, pi)");
  }
  return {ConstraintKind::separation, std::cos(dphi_min), tightened};
}

ConstraintSpec make_thrust_upper(int vehicle, double f_max, bool tightened) {
  if (vehicle != 1 && vehicle != 2) throw std::invalid_argument("vehicle index must be 1 or 2");
  if (!std::isfinite(f_max)) throw std::invalid_argument("thrust bound must be finite");
  return {vehicle == 1 ? ConstraintKind::thrust_upper_1 : ConstraintKind::thrust_upper_2, f_max, tightened};
}

ConstraintSpec make_thrust_lower(int vehicle, double f_min, bool tightened) {
  if (vehicle != 1 && vehicle != 2) throw std::invalid_argument("vehicle index must be 1 or 2");
  if (!std::isfinite(f_min)) throw std::invalid_argument("thrust bound must be finite");
  return {vehicle == 1 ? ConstraintKind::thrust_lower_1 : ConstraintKind::thrust_lower_2, -f_min, tightened};
}

void validate(const BoxSets& s) {
  auto pair = [](double lo, double hi, const char* name) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw std::invalid_argument(std::string("box bounds '") + name + "' need finite lower < upper");
    }
  };
  pair(s.fR_min, s.fR_max, "thrust");
  pair(s.tau_min, s.tau_max, "torque");
  pair(s.dfR_min, s.dfR_max, "thrust rate");
  pair(s.dtau_min, s.dtau_max, "torque rate");
}

double separation_value(const StateVector& x) { return std::cos(x(sx::phi2) - x(sx::phi1)); }

double constraint_value(const ConstraintSpec& spec, const StateVector& x) {
  switch (spec.kind) {
    case ConstraintKind::separation:
      return separation_value(x);
    case ConstraintKind::thrust_upper_1:
      return x(sx::fR1);
    case ConstraintKind::thrust_upper_2:
      return x(sx::fR2);
    case ConstraintKind::thrust_lower_1:
      return -x(sx::fR1);
    case ConstraintKind::thrust_lower_2:
      return -x(sx::fR2);
  }
  return 0.0;
}

RowVector12 constraint_state_jacobian(const ConstraintSpec& spec, const StateVector& x) {
  RowVector12 J = RowVector12::Zero();
  switch (spec.kind) {
    case ConstraintKind::separation: {
      const double s = std::sin(x(sx::phi2) - x(sx::phi1));
      J(sx::phi1) = s;
      J(sx::phi2) = -s;
      break;
    }
    case ConstraintKind::thrust_upper_1:
      J(sx::fR1) = 1.0;
      break;
    case ConstraintKind::thrust_upper_2:
      J(sx::fR2) = 1.0;
      break;
    case ConstraintKind::thrust_lower_1:
      J(sx::fR1) = -1.0;
      break;
    case ConstraintKind::thrust_lower_2:
      J(sx::fR2) = -1.0;
      break;
  }
  return J;
}

RowVector6 constraint_sensitivity(const ConstraintSpec& spec, const StateVector& x, const Sensitivity& Pi) {
  return constraint_state_jacobian(spec, x) * Pi;
}

double tightening_margin(const RowVector6& Pi_y, const WeightMatrix& W, double eps_s) {
  if (!(eps_s > 0.0)) throw std::invalid_argument("eps_s must be positive");
  const double q = Pi_y * W * Pi_y.transpose();
  if (q < 0.0) throw std::domain_error("negative quadratic form in tightening margin (W not PSD)");
  return std::sqrt(q + eps_s * eps_s);
}

double tightened_residual(const ConstraintSpec& spec, const StateVector& x, const Sensitivity& Pi,
                          const WeightMatrix& W, double eps_s) {
  const double r = constraint_value(spec, x) - spec.y_max;
  if (!spec.tightened) return r;
  return r + tightening_margin(constraint_sensitivity(spec, x, Pi), W, eps_s);
}

ConstraintLinearization linearize_constraint(const ConstraintSpec& spec, const StateVector& x,
                                             const Sensitivity& Pi, const WeightMatrix& W, double eps_s) {
  ConstraintLinearization lin;
  const RowVector12 J = constraint_state_jacobian(spec, x);
  lin.residual = constraint_value(spec, x) - spec.y_max;
  lin.d_x = J;
  if (!spec.tightened) return lin;

  const RowVector6 Pi_y = J * Pi;
  lin.alpha = tightening_margin(Pi_y, W, eps_s);
  lin.residual += lin.alpha;
  // d alpha / d Pi_y
  const RowVector6 w = (W * Pi_y.transpose()).transpose() / lin.alpha;
  lin.d_pi = J.transpose() * w;
  if (spec.kind == ConstraintKind::separation) {
    // Pi_y = sin(D) (Pi_phi1 - Pi_phi2) with D = phi2 - phi1.
    const double c = std::cos(x(sx::phi2) - x(sx::phi1));
    const double pw = (Pi.row(sx::phi1) - Pi.row(sx::phi2)).dot(w);
    lin.d_x(sx::phi1) += -c * pw;
    lin.d_x(sx::phi2) += c * pw;
  }
  return lin;
}

SignedResiduals signed_residuals(const StateVector& x, double dphi_min, double fR_max) {
  return {separation_value(x) - std::cos(dphi_min), x(sx::fR1) - fR_max, x(sx::fR2) - fR_max};
}

}  // namespace chainmpc
