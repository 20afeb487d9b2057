#pragma once

#include <Eigen/Dense>

#include <optional>

namespace chainmpc {

/// Bound magnitude treated as infinite.
inline constexpr double kQpInfinity = 1e20;

/// min 0.5 z'Hz + g'z  s.t.  lower <= A z <= upper.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Throws std::invalid_argument on inconsistent dimensions, asymmetric H or lower > upper.
void validate(const QpProblem& qp);

enum class QpStatus {
  solved,
  max_iter,
  infeasible,
  /// The problem data contained NaN or infinite entries (set by callers, never by solve_qp).
  non_finite
};

const char* to_string(QpStatus status);

enum class QpMethod {
  /// Dual active-set method (Goldfarb-Idnani); needs H positive definite.
  active_set,
  /// Operator splitting with equilibration, step-size adaptation and polishing.
  admm
};

struct QpSettings {
  QpMethod method{QpMethod::active_set};
  double tol_abs{1e-8};
  double tol_rel{1e-8};
  /// Active-set changes or ADMM iterations.
  int max_iter{4000};
  double rho{0.1};
  double sigma{1e-6};
  double relaxation{1.6};
  double infeasibility_tol{1e-6};
  int scaling_passes{10};
  int adapt_interval{25};
  bool polish{true};
};

/// Primal/dual guess, e.g. from a previous solve.
struct QpWarmStart {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
};

struct QpSolution {
  Eigen::VectorXd z;
  /// Multipliers of lower <= Az <= upper: negative at an active lower bound, positive at an active upper bound.
  Eigen::VectorXd y;
  QpStatus status{QpStatus::max_iter};
  double primal_residual{0.0};
  double dual_residual{0.0};
  int iterations{0};
  bool polished{false};
};

/// Dense convex QP solve. A warm active-set guess is tried before the selected
/// method runs; the active-set method falls back to ADMM if H is not positive definite.
QpSolution solve_qp(const QpProblem& qp, const QpSettings& settings = {},
                    const std::optional<QpWarmStart>& warm = std::nullopt);

}  // namespace chainmpc
