#include "chainmpc/ocp.hpp"

#include "chainmpc/sensitivity.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <chrono>
#include <stdexcept>

namespace chainmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kPathRows = 5;
constexpr int kTorqueRows = 2;
// Each block k holds the rows of u_k followed by the state rows of stage k+1.
constexpr int kRowsPerBlock = kInputDim + kPathRows + kTorqueRows;

using Dual12 = Eigen::AutoDiffScalar<Eigen::Matrix<double, kStateDim, 1>>;

Eigen::Matrix<double, 2, kStateDim> link_stress_jacobian(const StateVector& x, const Params& prm) {
  State<Dual12> xd;
  for (int i = 0; i < kStateDim; ++i) xd(i) = Dual12(x(i), kStateDim, i);
  const Vec2<Dual12> fL = link_stresses(xd, prm.cast<Dual12>());
  Eigen::Matrix<double, 2, kStateDim> J;
  J.row(0) = fL(0).derivatives().transpose();
  J.row(1) = fL(1).derivatives().transpose();
  return J;
}

Eigen::Map<const Eigen::Matrix<double, 1, kSensitivityDim>> vec_row(const Sensitivity& m) {
  return Eigen::Map<const Eigen::Matrix<double, 1, kSensitivityDim>>(m.data());
}

void check_shape(const DecisionTrajectory& traj, const OcpConfig& cfg) {
  const auto N = static_cast<std::size_t>(cfg.N);
  if (traj.u.size() != N || traj.x.size() != N + 1) {
    throw std::invalid_argument("trajectory length does not match the horizon");
  }
  if (cfg.tube() && traj.Pi.size() != N + 1) {
    throw std::invalid_argument("tube mode needs a sensitivity at every stage");
  }
}

// Per-block warm duals: block k of the next problem is block k+1 of this one.
VectorXd shift_duals(const VectorXd& y, int N) {
  if (y.size() != static_cast<Eigen::Index>(N) * kRowsPerBlock) return {};
  VectorXd out(y.size());
  for (int k = 0; k < N; ++k) {
    const int src = std::min(k + 1, N - 1);
    out.segment(k * kRowsPerBlock, kRowsPerBlock) = y.segment(src * kRowsPerBlock, kRowsPerBlock);
  }
  return out;
}

}  // namespace

const char* to_string(ControllerMode mode) { return mode == ControllerMode::tube ? "tube" : "nominal"; }

ControllerMode parse_mode(const std::string& text) {
  if (text == "nominal") return ControllerMode::nominal;
  if (text == "tube") return ControllerMode::tube;
  throw std::invalid_argument("unknown controller mode '" + text + "' (expected nominal or tube)");
}

void validate(const OcpConfig& cfg) {
  if (cfg.N < 1) throw std::invalid_argument("horizon N must be at least 1");
  if (!(cfg.Ts > 0.0)) throw std::invalid_argument("sampling time Ts must be positive");
  if ((cfg.Q.array() < 0.0).any() || !cfg.Q.allFinite()) throw std::invalid_argument("Q must be nonnegative");
  if ((cfg.Q_N.array() < 0.0).any() || !cfg.Q_N.allFinite()) throw std::invalid_argument("Q_N must be nonnegative");
  if (!(cfg.eps_s > 0.0)) throw std::invalid_argument("eps_s must be positive");
  if (!(cfg.lambda_reg >= 0.0)) throw std::invalid_argument("lambda_reg must be nonnegative");
  if (!(cfg.qp.tol_abs > 0.0 && cfg.qp.tol_rel >= 0.0 && cfg.qp.max_iter >= 1)) {
    throw std::invalid_argument("QP tolerances must be positive and max_iter at least 1");
  }
  validate(cfg.boxes);
  validate(cfg.uncertainty);
  validate(cfg.nominal);
  make_separation(cfg.dphi_min, false);
}

std::vector<ConstraintSpec> path_constraints(const OcpConfig& cfg) {
  const bool t = cfg.tube();
  return {make_separation(cfg.dphi_min, t), make_thrust_upper(1, cfg.boxes.fR_max, t),
          make_thrust_upper(2, cfg.boxes.fR_max, t), make_thrust_lower(1, cfg.boxes.fR_min, t),
          make_thrust_lower(2, cfg.boxes.fR_min, t)};
}

std::size_t DecisionTrajectory::variable_count() const {
  const std::size_t per_stage = has_sensitivities() ? kAugmentedDim : kStateDim;
  return per_stage * x.size() + kInputDim * u.size();
}

std::size_t variable_count(const OcpConfig& cfg) {
  const auto N = static_cast<std::size_t>(cfg.N);
  const std::size_t per_stage = cfg.tube() ? kAugmentedDim : kStateDim;
  return per_stage * (N + 1) + kInputDim * N;
}

DecisionTrajectory cold_start(const StateVector& x0, const Sensitivity& Pi0, const OcpConfig& cfg) {
  DecisionTrajectory traj;
  traj.x.assign(static_cast<std::size_t>(cfg.N) + 1, x0);
  traj.u.assign(static_cast<std::size_t>(cfg.N), InputVector::Zero());
  if (cfg.tube()) {
    traj.Pi.reserve(traj.x.size());
    traj.Pi.push_back(Pi0);
    for (int i = 0; i < cfg.N; ++i) {
      const AugmentedVector next =
          step_augmented(make_augmented(x0, traj.Pi.back()), InputVector::Zero(), cfg.nominal, cfg.Ts);
      traj.Pi.push_back(sensitivity_block(next));
    }
  }
  return traj;
}

void shift(DecisionTrajectory& traj, const OcpConfig& cfg) {
  check_shape(traj, cfg);
  const int N = cfg.N;
  for (int i = 0; i < N; ++i) traj.x[i] = traj.x[i + 1];
  for (int i = 0; i + 1 < N; ++i) traj.u[i] = traj.u[i + 1];
  const InputVector& u_last = traj.u[N - 1];
  if (cfg.tube()) {
    for (int i = 0; i < N; ++i) traj.Pi[i] = traj.Pi[i + 1];
    const AugmentedVector next = step_augmented(make_augmented(traj.x[N], traj.Pi[N]), u_last, cfg.nominal, cfg.Ts);
    traj.x[N] = next.head<kStateDim>();
    traj.Pi[N] = sensitivity_block(next);
  } else {
    traj.x[N] = step_state(traj.x[N], u_last, cfg.nominal, cfg.Ts);
  }
}

OutputVector output_map(const StateVector& x, const InputVector& /*u*/, const Params& prm) {
  OutputVector h;
  h.segment<2>(0) = x.segment<2>(sx::phi1);
  h.segment<2>(2) = link_stresses(x, prm);
  h.segment<2>(4) = x.segment<2>(sx::dphi1);
  h.segment<2>(6) = accelerations(x, prm).phi;
  return h;
}

TerminalOutputVector terminal_output_map(const StateVector& x, const Params& prm) {
  TerminalOutputVector h;
  h.segment<2>(0) = x.segment<2>(sx::phi1);
  h.segment<2>(2) = link_stresses(x, prm);
  return h;
}

double stage_cost(const StateVector& x, const InputVector& u, const OutputVector& r, const OutputVector& Q,
                  const Params& prm) {
  const OutputVector e = output_map(x, u, prm) - r;
  return 0.5 * e.dot(Q.cwiseProduct(e));
}

double terminal_cost(const StateVector& x, const TerminalOutputVector& r, const TerminalOutputVector& Q_N,
                     const Params& prm) {
  const TerminalOutputVector e = terminal_output_map(x, prm) - r;
  return 0.5 * e.dot(Q_N.cwiseProduct(e));
}

OutputLinearization linearize_output(const StateVector& x, const OutputVector& r, const Params& prm) {
  OutputLinearization out;
  out.residual = output_map(x, InputVector::Zero(), prm) - r;
  out.jacobian = MatrixXd::Zero(kOutputDim, kStateDim);
  out.jacobian(0, sx::phi1) = 1.0;
  out.jacobian(1, sx::phi2) = 1.0;
  out.jacobian.middleRows<2>(2) = link_stress_jacobian(x, prm);
  out.jacobian(4, sx::dphi1) = 1.0;
  out.jacobian(5, sx::dphi2) = 1.0;
  out.jacobian.middleRows<2>(6) = acceleration_partials(x, prm).wrt_state;
  return out;
}

OutputLinearization linearize_terminal_output(const StateVector& x, const TerminalOutputVector& r,
                                              const Params& prm) {
  OutputLinearization out;
  out.residual = terminal_output_map(x, prm) - r;
  out.jacobian = MatrixXd::Zero(kTerminalOutputDim, kStateDim);
  out.jacobian(0, sx::phi1) = 1.0;
  out.jacobian(1, sx::phi2) = 1.0;
  out.jacobian.middleRows<2>(2) = link_stress_jacobian(x, prm);
  return out;
}

StageLinearization linearize_stage(const StateVector& x, const Sensitivity& Pi, const InputVector& u,
                                   const OutputVector& r, const OcpConfig& cfg) {
  StageLinearization lin;
  if (cfg.tube()) {
    const AugmentedStepJacobians j = step_augmented_jacobians(x, Pi, u, cfg.nominal, cfg.Ts);
    lin.x_next = j.state.next;
    lin.A = j.state.A;
    lin.B = j.state.B;
    lin.pi_next = j.next_pi;
    lin.D = j.dpi_dx;
    lin.E = j.dpi_du;
  } else {
    const StepJacobians j = step_state_jacobians(x, u, cfg.nominal, cfg.Ts);
    lin.x_next = j.next;
    lin.A = j.A;
    lin.B = j.B;
  }
  lin.output = linearize_output(x, r, cfg.nominal);
  const auto W = weighting_matrix(cfg.uncertainty);
  for (const ConstraintSpec& spec : path_constraints(cfg)) {
    lin.constraints.push_back(linearize_constraint(spec, x, Pi, W, cfg.eps_s));
  }
  return lin;
}

CondensedQp condense(const DecisionTrajectory& traj, const HorizonReference& refs, const StateVector& x0,
                     const Sensitivity& Pi0, const OcpConfig& cfg) {
  check_shape(traj, cfg);
  if (refs.stages.size() != static_cast<std::size_t>(cfg.N)) {
    throw std::invalid_argument("reference length does not match the horizon");
  }
  const int N = cfg.N;
  const int nu = kInputDim * N;
  const bool tube = cfg.tube();
  const auto W = weighting_matrix(cfg.uncertainty);
  const auto specs = path_constraints(cfg);
  const Sensitivity zero_pi = Sensitivity::Zero();
  auto pi_at = [&](int i) -> const Sensitivity& { return tube ? traj.Pi[i] : zero_pi; };

  CondensedQp out;
  QpProblem& qp = out.qp;
  qp.H = MatrixXd::Zero(nu, nu);
  qp.g = VectorXd::Zero(nu);
  qp.A = MatrixXd::Zero(N * kRowsPerBlock, nu);
  qp.lower = VectorXd::Constant(N * kRowsPerBlock, -kQpInfinity);
  qp.upper = VectorXd::Constant(N * kRowsPerBlock, kQpInfinity);

  // Stage deviations as affine maps of the stacked input step:
  // dx_i = Gx du + cx, vec(dPi_i) = Gp du + cp.
  MatrixXd Gx = MatrixXd::Zero(kStateDim, nu);
  VectorXd cx = x0 - traj.x[0];
  MatrixXd Gp;
  VectorXd cp;
  if (tube) {
    Gp = MatrixXd::Zero(kSensitivityDim, nu);
    const Sensitivity dPi0 = Pi0 - traj.Pi[0];
    cp = Eigen::Map<const VectorXd>(dPi0.data(), kSensitivityDim);
  }

  auto add_cost = [&](const OutputLinearization& out, const VectorXd& weights, int cols) {
    if (cols == 0) return;
    const VectorXd sw = weights.cwiseSqrt();
    const MatrixXd M = sw.asDiagonal() * (out.jacobian * Gx.leftCols(cols));
    const VectorXd e = sw.cwiseProduct(out.residual + out.jacobian * cx);
    qp.H.topLeftCorner(cols, cols).noalias() += M.transpose() * M;
    qp.g.head(cols).noalias() += M.transpose() * e;
  };

  auto add_state_rows = [&](int stage, const std::vector<ConstraintLinearization>& cons) {
    const int cols = kInputDim * stage;
    const int base = (stage - 1) * kRowsPerBlock + kInputDim;
    for (int c = 0; c < kPathRows; ++c) {
      const ConstraintLinearization& cl = cons[static_cast<std::size_t>(c)];
      double offset = cl.residual + cl.d_x.dot(cx);
      qp.A.row(base + c).head(cols).noalias() = cl.d_x * Gx.leftCols(cols);
      if (tube) {
        qp.A.row(base + c).head(cols).noalias() += vec_row(cl.d_pi) * Gp.leftCols(cols);
        offset += vec_row(cl.d_pi).dot(cp);
      }
      qp.upper(base + c) = -offset;
    }
    const StateVector& xs = traj.x[static_cast<std::size_t>(stage)];
    for (int j = 0; j < kTorqueRows; ++j) {
      const int row = base + kPathRows + j;
      const int idx = sx::tau1 + j;
      qp.A.row(row).head(cols) = Gx.row(idx).head(cols);
      qp.lower(row) = cfg.boxes.tau_min - xs(idx) - cx(idx);
      qp.upper(row) = cfg.boxes.tau_max - xs(idx) - cx(idx);
    }
  };

  std::vector<StageLinearization>& lins = out.stages;
  lins.reserve(static_cast<std::size_t>(N));
  const InputVector u_lo = cfg.boxes.input_lower();
  const InputVector u_hi = cfg.boxes.input_upper();

  for (int i = 0; i < N; ++i) {
    const auto si = static_cast<std::size_t>(i);
    lins.push_back(linearize_stage(traj.x[si], pi_at(i), traj.u[si], refs.stages[si].stage(), cfg));
    const StageLinearization& lin = lins.back();
    const int cols = kInputDim * i;
    if (i >= 1) {
      add_state_rows(i, lin.constraints);
      add_cost(lin.output, cfg.Q, cols);
    }

    const int base = i * kRowsPerBlock;
    for (int j = 0; j < kInputDim; ++j) {
      qp.A(base + j, cols + j) = 1.0;
      qp.lower(base + j) = u_lo(j) - traj.u[si](j);
      qp.upper(base + j) = u_hi(j) - traj.u[si](j);
    }

    // Propagate the affine maps to stage i+1.
    if (tube) {
      for (int c = 0; c < kParamDim; ++c) {
        auto blk = Gp.block(c * kStateDim, 0, kStateDim, cols);
        blk = lin.A * blk;
        auto cblk = cp.segment(c * kStateDim, kStateDim);
        cblk = lin.A * cblk;
      }
      Gp.leftCols(cols).noalias() += lin.D * Gx.leftCols(cols);
      Gp.middleCols(cols, kInputDim) = lin.E;
      const Sensitivity dPi = lin.pi_next - traj.Pi[si + 1];
      cp.noalias() += lin.D * cx;
      cp += Eigen::Map<const VectorXd>(dPi.data(), kSensitivityDim);
    }
    Gx.leftCols(cols) = lin.A * Gx.leftCols(cols);
    Gx.middleCols(cols, kInputDim) = lin.B;
    cx = lin.A * cx + (lin.x_next - traj.x[si + 1]);
  }

  // Terminal stage.
  {
    const StateVector& xN = traj.x[static_cast<std::size_t>(N)];
    std::vector<ConstraintLinearization> cons;
    for (const ConstraintSpec& spec : specs) cons.push_back(linearize_constraint(spec, xN, pi_at(N), W, cfg.eps_s));
    add_state_rows(N, cons);
    add_cost(linearize_terminal_output(xN, refs.terminal, cfg.nominal), cfg.Q_N, nu);
  }
  qp.H.diagonal().array() += cfg.lambda_reg;
  // Round-off can leave the accumulated Hessian slightly asymmetric.
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();

  return out;
}

DecisionTrajectory expand_step(const CondensedQp& cqp, const DecisionTrajectory& traj, const Eigen::VectorXd& du,
                               const StateVector& x0, const Sensitivity& Pi0, const OcpConfig& cfg) {
  const int N = cfg.N;
  const bool tube = cfg.tube();
  const std::vector<StageLinearization>& lins = cqp.stages;
  DecisionTrajectory d;

  d.u.resize(static_cast<std::size_t>(N));
  d.x.resize(static_cast<std::size_t>(N) + 1);
  d.x[0] = x0 - traj.x[0];
  if (tube) {
    d.Pi.resize(static_cast<std::size_t>(N) + 1);
    d.Pi[0] = Pi0 - traj.Pi[0];
  }
  for (int i = 0; i < N; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const StageLinearization& lin = lins[si];
    d.u[si] = du.segment<kInputDim>(kInputDim * i);
    d.x[si + 1] = lin.A * d.x[si] + lin.B * d.u[si] + (lin.x_next - traj.x[si + 1]);
    if (tube) {
      Eigen::Matrix<double, kSensitivityDim, 1> dv = lin.D * d.x[si] + lin.E * d.u[si];
      const Sensitivity coupled = Eigen::Map<const Sensitivity>(dv.data());
      d.Pi[si + 1] = lin.A * d.Pi[si] + coupled + (lin.pi_next - traj.Pi[si + 1]);
    }
  }
  return d;
}

SqpStep condense_and_solve(const DecisionTrajectory& traj, const HorizonReference& refs, const StateVector& x0,
                           const Sensitivity& Pi0, const OcpConfig& cfg, const std::optional<QpWarmStart>& warm) {
  const CondensedQp cqp = condense(traj, refs, x0, Pi0, cfg);
  SqpStep step;
  const QpProblem& qp = cqp.qp;
  // Open bounds are +-kQpInfinity, so every entry of a sane problem is finite.
  if (!qp.H.allFinite() || !qp.g.allFinite() || !qp.A.allFinite() || !qp.lower.allFinite() ||
      !qp.upper.allFinite()) {
    step.qp.status = QpStatus::non_finite;
    step.qp.z = VectorXd::Zero(qp.g.size());
    return step;
  }
  // A residual beyond kQpInfinity leaves an empty row.
  if ((qp.lower.array() > qp.upper.array()).any()) {
    step.qp.status = QpStatus::infeasible;
    step.qp.z = VectorXd::Zero(qp.g.size());
    return step;
  }
  step.qp = solve_qp(qp, cfg.qp, warm);
  step.delta = expand_step(cqp, traj, step.qp.z, x0, Pi0, cfg);
  return step;
}

void apply_step(DecisionTrajectory& traj, const DecisionTrajectory& delta) {
  if (traj.x.size() != delta.x.size() || traj.u.size() != delta.u.size() || traj.Pi.size() != delta.Pi.size()) {
    throw std::invalid_argument("step layout does not match the iterate");
  }
  for (std::size_t i = 0; i < traj.x.size(); ++i) traj.x[i] += delta.x[i];
  for (std::size_t i = 0; i < traj.u.size(); ++i) traj.u[i] += delta.u[i];
  for (std::size_t i = 0; i < traj.Pi.size(); ++i) traj.Pi[i] += delta.Pi[i];
}

double step_norm(const DecisionTrajectory& delta) {
  double n = 0.0;
  for (const auto& v : delta.x) n = std::max(n, v.lpNorm<Eigen::Infinity>());
  for (const auto& v : delta.u) n = std::max(n, v.lpNorm<Eigen::Infinity>());
  for (const auto& v : delta.Pi) n = std::max(n, v.lpNorm<Eigen::Infinity>());
  return n;
}

double max_defect(const DecisionTrajectory& traj, const OcpConfig& cfg) {
  check_shape(traj, cfg);
  double worst = 0.0;
  for (int i = 0; i < cfg.N; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (cfg.tube()) {
      const AugmentedVector next = step_augmented(make_augmented(traj.x[si], traj.Pi[si]), traj.u[si], cfg.nominal, cfg.Ts);
      worst = std::max(worst, (next.head<kStateDim>() - traj.x[si + 1]).lpNorm<Eigen::Infinity>());
      worst = std::max(worst, (sensitivity_block(next) - traj.Pi[si + 1]).lpNorm<Eigen::Infinity>());
    } else {
      worst = std::max(worst, (step_state(traj.x[si], traj.u[si], cfg.nominal, cfg.Ts) - traj.x[si + 1])
                                  .lpNorm<Eigen::Infinity>());
    }
  }
  return worst;
}

namespace {
bool is_finite(const DecisionTrajectory& traj) {
  for (const StateVector& x : traj.x) {
    if (!x.allFinite()) return false;
  }
  for (const Sensitivity& Pi : traj.Pi) {
    if (!Pi.allFinite()) return false;
  }
  for (const InputVector& u : traj.u) {
    if (!u.allFinite()) return false;
  }
  return true;
}
}  // namespace

RtiController::RtiController(OcpConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

void RtiController::reset() {
  warm_.reset();
  duals_.resize(0);
  last_u_.setZero();
}

RtiController::Result RtiController::rti_step(const StateVector& x_measured, const Sensitivity& Pi_current,
                                              const HorizonReference& refs) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if (!warm_) warm_ = cold_start(x_measured, Pi_current, cfg_);

  std::optional<QpWarmStart> qp_warm;
  if (duals_.size() > 0) qp_warm = QpWarmStart{VectorXd::Zero(kInputDim * cfg_.N), duals_};
  const SqpStep step = condense_and_solve(*warm_, refs, x_measured, Pi_current, cfg_, qp_warm);
  const auto stop = Clock::now();

  Result res;
  RtiDiagnostics& diag = res.diagnostics;
  diag.status = step.qp.status;
  diag.qp_iterations = step.qp.iterations;
  diag.primal_residual = step.qp.primal_residual;
  diag.dual_residual = step.qp.dual_residual;
  diag.solve_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  diag.qp_failed = step.qp.status != QpStatus::solved || !step.qp.z.allFinite();

  if (!diag.qp_failed) {
    DecisionTrajectory next = *warm_;
    apply_step(next, step.delta);
    if (is_finite(next)) {
      diag.step_norm = step_norm(step.delta);
      *warm_ = std::move(next);
      res.u0 = warm_->u[0];
      last_u_ = res.u0;
      duals_ = shift_duals(step.qp.y, cfg_.N);
    } else {
      diag.status = QpStatus::non_finite;
      diag.qp_failed = true;
    }
  }
  if (diag.qp_failed) {
    res.u0 = last_u_;
    duals_.resize(0);
    if (is_finite(*warm_)) {
      warm_->x[0] = x_measured;
      if (cfg_.tube()) warm_->Pi[0] = Pi_current;
    } else {
      // A blown-up prediction cannot be reused; the next call starts cold.
      warm_.reset();
      return res;
    }
  }

  const auto W = weighting_matrix(cfg_.uncertainty);
  const auto specs = path_constraints(cfg_);
  if (cfg_.tube()) {
    for (std::size_t c = 0; c < 3; ++c) {
      diag.alpha[c] = tightening_margin(constraint_sensitivity(specs[c], x_measured, Pi_current), W, cfg_.eps_s);
    }
  }
  diag.predicted_residual.assign(specs.size(), -kQpInfinity);
  const Sensitivity zero_pi = Sensitivity::Zero();
  for (int i = 1; i <= cfg_.N; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Sensitivity& Pi = cfg_.tube() ? warm_->Pi[si] : zero_pi;
    for (std::size_t c = 0; c < specs.size(); ++c) {
      diag.predicted_residual[c] =
          std::max(diag.predicted_residual[c], tightened_residual(specs[c], warm_->x[si], Pi, W, cfg_.eps_s));
    }
  }

  shift(*warm_, cfg_);
  return res;
}

FullSolveResult solve_full(const StateVector& x0, const Sensitivity& Pi0, const HorizonReference& refs,
                           const OcpConfig& cfg, double kkt_tol, int max_sqp_iter,
                           const std::optional<DecisionTrajectory>& initial) {
  validate(cfg);
  FullSolveResult out;
  out.trajectory = initial ? *initial : cold_start(x0, Pi0, cfg);
  for (int it = 1; it <= max_sqp_iter; ++it) {
    const SqpStep step = condense_and_solve(out.trajectory, refs, x0, Pi0, cfg);
    out.iterations = it;
    out.last_status = step.qp.status;
    if (step.qp.status != QpStatus::solved) return out;
    apply_step(out.trajectory, step.delta);
    out.step_norm = step_norm(step.delta);
    if (out.step_norm <= kkt_tol) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace chainmpc
