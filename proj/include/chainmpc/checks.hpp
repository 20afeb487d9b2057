#pragma once

// Self-verification suites run by the command-line tool.

#include "chainmpc/qp.hpp"
#include "chainmpc/types.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace chainmpc {

using VectorField = std::function<StateVector(const StateVector&, const InputVector&, const Params&)>;

/// The chain model's own vector field.
VectorField model_vector_field();

struct CheckOptions {
  std::uint64_t seed{20240611};
  /// Field integrated by the energy suite; replaceable to confirm the suite detects model errors.
  VectorField field = model_vector_field();
};

struct CheckResult {
  std::string name;
  bool passed{false};
  /// Worst observed error against the pinned tolerance.
  double worst{0.0};
  double tolerance{0.0};
  std::string detail;
};

/// Unactuated energy drift (2 s, dt = 1e-4) and work-energy balance under constant actuation rates.
CheckResult check_energy(const CheckOptions& opt);
/// f_x and f_p against central differences, and Pi against perturbed rollouts over 1 s.
CheckResult check_jacobian(const CheckOptions& opt);
/// Full planar Newton balance of both vehicles using the reported link stresses.
CheckResult check_newton(const CheckOptions& opt);
/// Random small QPs against exhaustive active-set enumeration.
CheckResult check_qp(const CheckOptions& opt);
/// Quintic endpoint conditions, IK round trips and the reachability margin of the default ellipse.
CheckResult check_ik(const CheckOptions& opt);

std::vector<std::string> check_suite_names();

/// Runs the named suites in order. Throws std::invalid_argument on an empty or unknown selection.
std::vector<CheckResult> run_checks(const std::vector<std::string>& suites, const CheckOptions& opt = {});

/// State with phi1 in [0.2, 1.4], phi2 - phi1 in [0.7, 2.4], small pitch, rates in [-1, 1],
/// thrust in [3, 20], torque in [-5, 5].
StateVector random_state(std::mt19937_64& gen);

/// Minimizer of a strictly convex QP by trying every active set (small problems only).
/// Returns an empty vector when no KKT point exists.
Eigen::VectorXd enumerate_qp(const QpProblem& qp);

}  // namespace chainmpc
