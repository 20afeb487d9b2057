#pragma once

// Multiple-shooting transcription of the tracking OCP (nominal and
// sensitivity-tightened), condensed onto the input deviations and solved by
// Gauss-Newton SQP in real-time-iteration mode.

#include "chainmpc/constraints.hpp"
#include "chainmpc/qp.hpp"
#include "chainmpc/reference.hpp"
#include "chainmpc/uncertainty.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace chainmpc {

enum class ControllerMode { nominal, tube };

const char* to_string(ControllerMode mode);
/// Accepts "nominal" or "tube"; throws std::invalid_argument otherwise.
ControllerMode parse_mode(const std::string& text);

using OutputVector = Eigen::Matrix<double, kOutputDim, 1>;
using TerminalOutputVector = Eigen::Matrix<double, kTerminalOutputDim, 1>;

struct OcpConfig {
  int N{30};
  double Ts{0.01};
  ControllerMode mode{ControllerMode::nominal};
  /// Diagonal weights on [phi; f_L; phidot; phiddot] and on the terminal [phi; f_L].
  OutputVector Q = (OutputVector() << 5.0, 5.0, 1.0, 1.0, 0.1, 0.1, 0.1, 0.1).finished();
  TerminalOutputVector Q_N = (TerminalOutputVector() << 50.0, 50.0, 10.0, 10.0).finished();
  BoxSets boxes;
  double dphi_min{deg2rad(30.0)};
  UncertaintyBox uncertainty;
  double eps_s{1e-12};
  /// Added to the condensed Gauss-Newton Hessian.
  double lambda_reg{1e-9};
  Params nominal;
  QpSettings qp;

  bool tube() const { return mode == ControllerMode::tube; }
};

void validate(const OcpConfig& cfg);

/// Separation, upper and lower thrust bounds; tightened in tube mode.
std::vector<ConstraintSpec> path_constraints(const OcpConfig& cfg);

struct DecisionTrajectory {
  std::vector<StateVector> x;
  /// Empty in nominal mode.
  std::vector<Sensitivity> Pi;
  std::vector<InputVector> u;

  int horizon() const { return static_cast<int>(u.size()); }
  bool has_sensitivities() const { return !Pi.empty(); }
  std::size_t variable_count() const;
};

/// 12(N+1)+4N in nominal mode, 84(N+1)+4N in tube mode.
std::size_t variable_count(const OcpConfig& cfg);

/// Repeated x0, zero inputs, Pi rolled out from Pi0 along the constant state.
DecisionTrajectory cold_start(const StateVector& x0, const Sensitivity& Pi0, const OcpConfig& cfg);

/// Drops stage 0, duplicates the last input and extends the tail with one model step.
void shift(DecisionTrajectory& traj, const OcpConfig& cfg);

/// h(x, u) = [phi; f_L; phidot; phiddot]. The rates u do not enter.
OutputVector output_map(const StateVector& x, const InputVector& u, const Params& prm);
/// h_N(x) = [phi; f_L].
TerminalOutputVector terminal_output_map(const StateVector& x, const Params& prm);

double stage_cost(const StateVector& x, const InputVector& u, const OutputVector& r, const OutputVector& Q,
                  const Params& prm);
double terminal_cost(const StateVector& x, const TerminalOutputVector& r, const TerminalOutputVector& Q_N,
                     const Params& prm);

/// Output residual h - r and its state Jacobian.
struct OutputLinearization {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

OutputLinearization linearize_output(const StateVector& x, const OutputVector& r, const Params& prm);
OutputLinearization linearize_terminal_output(const StateVector& x, const TerminalOutputVector& r,
                                              const Params& prm);

/// Gauss-Newton blocks of one shooting interval. In tube mode the augmented
/// transition is [[A, 0], [D, kron(I, A)]] with input block [B; E].
struct StageLinearization {
  StateVector x_next;
  Sensitivity pi_next = Sensitivity::Zero();
  Eigen::Matrix<double, kStateDim, kStateDim> A;
  Eigen::Matrix<double, kStateDim, kInputDim> B;
  Eigen::Matrix<double, kSensitivityDim, kStateDim> D = Eigen::Matrix<double, kSensitivityDim, kStateDim>::Zero();
  Eigen::Matrix<double, kSensitivityDim, kInputDim> E = Eigen::Matrix<double, kSensitivityDim, kInputDim>::Zero();
  OutputLinearization output;
  std::vector<ConstraintLinearization> constraints;
};

StageLinearization linearize_stage(const StateVector& x, const Sensitivity& Pi, const InputVector& u,
                                   const OutputVector& r, const OcpConfig& cfg);

/// Dense QP over the stacked input step du = (du_0, ..., du_{N-1}). Rows are grouped
/// per block k: the input box of u_k, then the path and torque rows of stage k+1.
struct CondensedQp {
  QpProblem qp;
  std::vector<StageLinearization> stages;
};

CondensedQp condense(const DecisionTrajectory& traj, const HorizonReference& refs, const StateVector& x0,
                     const Sensitivity& Pi0, const OcpConfig& cfg);

/// State (and sensitivity) deviations implied by du through the linearized dynamics.
DecisionTrajectory expand_step(const CondensedQp& cqp, const DecisionTrajectory& traj, const Eigen::VectorXd& du,
                               const StateVector& x0, const Sensitivity& Pi0, const OcpConfig& cfg);

struct SqpStep {
  /// Full-trajectory deviations with the same layout as the iterate.
  DecisionTrajectory delta;
  QpSolution qp;
};

/// One condensed Gauss-Newton QP around traj with x_0 = x0 and Pi_0 = Pi0 embedded.
SqpStep condense_and_solve(const DecisionTrajectory& traj, const HorizonReference& refs, const StateVector& x0,
                           const Sensitivity& Pi0, const OcpConfig& cfg,
                           const std::optional<QpWarmStart>& warm = std::nullopt);

/// Adds a step to an iterate.
void apply_step(DecisionTrajectory& traj, const DecisionTrajectory& delta);

/// Infinity norm over all entries of a step.
double step_norm(const DecisionTrajectory& delta);

/// Largest dynamics defect |F(x_i, u_i) - x_{i+1}| (and of Pi in tube mode).
double max_defect(const DecisionTrajectory& traj, const OcpConfig& cfg);

struct RtiDiagnostics {
  QpStatus status{QpStatus::solved};
  bool qp_failed{false};
  int qp_iterations{0};
  double primal_residual{0.0};
  double dual_residual{0.0};
  /// Wall time of linearization, condensing and QP solve.
  double solve_time_ms{0.0};
  double step_norm{0.0};
  /// Margins at the current state for separation, thrust_upper_1, thrust_upper_2 (zero in nominal mode).
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  /// Largest predicted (tightened) residual per constraint over stages 1..N of the new iterate.
  std::vector<double> predicted_residual;
};

/// Stateful controller: warm trajectory, duals and the last applied input.
class RtiController {
 public:
  explicit RtiController(OcpConfig cfg);

  struct Result {
    InputVector u0;
    RtiDiagnostics diagnostics;
  };

  /// One linearize-condense-solve-update pass, then shift for the next call.
  Result rti_step(const StateVector& x_measured, const Sensitivity& Pi_current, const HorizonReference& refs);

  const OcpConfig& config() const { return cfg_; }
  /// Warm trajectory for the next call (after shifting).
  const std::optional<DecisionTrajectory>& warm() const { return warm_; }
  void set_warm(DecisionTrajectory traj) { warm_ = std::move(traj); }
  void reset();

 private:
  OcpConfig cfg_;
  std::optional<DecisionTrajectory> warm_;
  Eigen::VectorXd duals_;
  InputVector last_u_ = InputVector::Zero();
};

struct FullSolveResult {
  DecisionTrajectory trajectory;
  bool converged{false};
  int iterations{0};
  double step_norm{0.0};
  QpStatus last_status{QpStatus::solved};
};

/// SQP iterated until the step norm drops below kkt_tol (offline reference solution).
FullSolveResult solve_full(const StateVector& x0, const Sensitivity& Pi0, const HorizonReference& refs,
                           const OcpConfig& cfg, double kkt_tol = 1e-8, int max_sqp_iter = 100,
                           const std::optional<DecisionTrajectory>& initial = std::nullopt);

}  // namespace chainmpc
