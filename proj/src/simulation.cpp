#include "chainmpc/simulation.hpp"

#include "chainmpc/sensitivity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace chainmpc {

int SimConfig::substeps() const { return static_cast<int>(std::lround(ocp.Ts / plant_dt)); }

int SimConfig::control_steps() const { return static_cast<int>(std::lround(duration / ocp.Ts)); }

void validate(const SimConfig& sim) {
  if (!(sim.plant_dt > 0.0)) throw std::invalid_argument("plant step must be positive");
  if (!(sim.duration > 0.0)) throw std::invalid_argument("duration must be positive");
  validate(sim.ocp);
  validate(sim.ellipse);
  const double ratio = sim.ocp.Ts / sim.plant_dt;
  if (std::lround(ratio) < 1 || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("plant rate must be an integer multiple of the control rate");
  }
  const double periods = sim.duration / sim.ocp.Ts;
  if (std::abs(periods - std::round(periods)) > 1e-9) {
    throw std::invalid_argument("duration must be a whole number of control periods");
  }
  if (!sim.e_phi0.allFinite() || !sim.Pi0.allFinite()) throw std::invalid_argument("initial values must be finite");
  apply_deviations(sim.ocp.nominal, sim.p_true);
}

StateVector initial_state(const ReferencePoint& r0, const Eigen::Vector2d& e_phi0, const Params& nominal,
                          const BoxSets& boxes) {
  StateVector x = StateVector::Zero();
  x.segment<2>(sx::phi1) = r0.phi_d + e_phi0;
  x(sx::fR1) = std::clamp(nominal.m1 * nominal.g, boxes.fR_min, boxes.fR_max);
  x(sx::fR2) = std::clamp(nominal.m2 * nominal.g, boxes.fR_min, boxes.fR_max);
  return x;
}

TrialLog run_trial(const SimConfig& sim_in, ControllerMode mode) {
  SimConfig sim = sim_in;
  sim.ocp.mode = mode;
  validate(sim);

  const Params& nominal = sim.ocp.nominal;
  const Params plant = apply_deviations(nominal, sim.p_true);
  const DenseReference dense = build_dense_reference(sim.ellipse, nominal, sim.fL_d, sim.plant_dt);
  const int substeps = sim.substeps();
  const int steps = sim.control_steps();
  const double Ts = sim.ocp.Ts;
  const InputVector u_lo = sim.ocp.boxes.input_lower();
  const InputVector u_hi = sim.ocp.boxes.input_upper();

  RtiController controller(sim.ocp);
  TrialLog log;
  log.mode = mode;
  log.p_true = sim.p_true;
  log.rows.reserve(static_cast<std::size_t>(steps * substeps + 1));
  log.solve_times_ms.reserve(static_cast<std::size_t>(steps));

  StateVector x = initial_state(dense.at(0.0), sim.e_phi0, nominal, sim.ocp.boxes);
  Sensitivity Pi = sim.Pi0;

  auto record = [&](double t, const InputVector& u, const RtiDiagnostics& diag) {
    TrialSample row;
    row.t = t;
    row.x = x;
    row.u = u;
    const ReferencePoint r = dense.at(t);
    row.phi_d = r.phi_d;
    row.fL_d = r.fL_d;
    row.fL = link_stresses(x, plant);
    row.s = signed_residuals(x, sim.ocp.dphi_min, sim.ocp.boxes.fR_max);
    row.alpha = diag.alpha;
    row.qp_status = diag.status;
    row.qp_time_ms = diag.solve_time_ms;
    log.rows.push_back(row);
  };

  RtiDiagnostics last_diag;
  InputVector u = InputVector::Zero();
  for (int k = 0; k < steps; ++k) {
    const double t_k = k * Ts;
    const HorizonReference refs = build_reference(dense, t_k, Ts, sim.ocp.N);
    const RtiController::Result res = controller.rti_step(x, Pi, refs);
    u = res.u0.cwiseMax(u_lo).cwiseMin(u_hi);
    last_diag = res.diagnostics;
    ++log.control_steps;
    if (last_diag.qp_failed) ++log.qp_failures;
    log.solve_times_ms.push_back(last_diag.solve_time_ms);

    if (sim.ocp.tube()) {
      Pi = sensitivity_block(step_augmented(make_augmented(x, Pi), u, nominal, Ts));
    }
    for (int j = 0; j < substeps; ++j) {
      record(t_k + j * sim.plant_dt, u, last_diag);
      x = step_state(x, u, plant, sim.plant_dt);
    }
    if (!x.allFinite() || !Pi.allFinite()) {
      log.diverged = true;
      return log;
    }
  }
  record(steps * Ts, u, last_diag);
  return log;
}

void write_trial_csv(std::ostream& os, const TrialLog& log) {
  os << "t,phi1,phi2,th1,th2,dphi1,dphi2,dth1,dth2,fR1,fR2,tau1,tau2,ufR1,ufR2,utau1,utau2,"
        "phi1_d,phi2_d,fL1,fL2,fL1_d,fL2_d,e_phi1,e_phi2,e_fL1,e_fL2,s_delta,s_fR1,s_fR2,"
        "alpha_sep,alpha_fR1,alpha_fR2,qp_status,qp_time_ms\n";
  for (const TrialSample& r : log.rows) {
    const StateVector& x = r.x;
    std::string line = fmt::format("{:.3f}", r.t);
    auto put = [&line](double v) { line += fmt::format(",{:.17g}", v); };
    for (int i = 0; i < 8; ++i) put(rad2deg(x(i)));
    for (int i = 8; i < kStateDim; ++i) put(x(i));
    for (int i = 0; i < kInputDim; ++i) put(r.u(i));
    put(rad2deg(r.phi_d(0)));
    put(rad2deg(r.phi_d(1)));
    put(r.fL(0));
    put(r.fL(1));
    put(r.fL_d(0));
    put(r.fL_d(1));
    put(rad2deg(x(sx::phi1) - r.phi_d(0)));
    put(rad2deg(x(sx::phi2) - r.phi_d(1)));
    put(r.fL(0) - r.fL_d(0));
    put(r.fL(1) - r.fL_d(1));
    put(r.s.s_delta);
    put(r.s.s_fR1);
    put(r.s.s_fR2);
    for (double a : r.alpha) put(a);
    line += ',';
    line += to_string(r.qp_status);
    line += fmt::format(",{:.6f}\n", r.qp_time_ms);
    os << line;
  }
}

}  // namespace chainmpc
