#include "chainmpc/checks.hpp"

#include "chainmpc/reference.hpp"
#include "chainmpc/sensitivity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chainmpc {

namespace {

double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& gen, double lo, double hi) { return lo + (hi - lo) * unit(gen); }

CheckResult finish(std::string name, double worst, double tol, std::string detail) {
  CheckResult r;
  r.name = std::move(name);
  r.worst = worst;
  r.tolerance = tol;
  r.passed = std::isfinite(worst) && worst <= tol;
  r.detail = std::move(detail);
  return r;
}

double kinetic_plus_potential_scale(const StateVector& x, const Params& prm) {
  using std::sin;
  const Eigen::Vector2d qd = x.segment<2>(sx::dphi1);
  const double kin = 0.5 * qd.dot(mass_matrix(x(sx::phi1), x(sx::phi2), prm) * qd) +
                     0.5 * prm.J1 * x(sx::dth1) * x(sx::dth1) + 0.5 * prm.J2 * x(sx::dth2) * x(sx::dth2);
  const double z1 = prm.l1 * sin(x(sx::phi1));
  const double z2 = z1 + prm.l2 * sin(x(sx::phi2));
  return std::abs(kin) + std::abs(prm.g * (prm.m1 * z1 + prm.m2 * z2));
}

DeviationVector random_deviation(std::mt19937_64& gen) {
  DeviationVector p;
  for (int k = 0; k < kParamDim; ++k) p(k) = uniform(gen, -0.25, 0.25);
  return p;
}

InputVector random_input(std::mt19937_64& gen, double scale) {
  InputVector u;
  for (int k = 0; k < kInputDim; ++k) u(k) = uniform(gen, -scale, scale);
  return u;
}

QpProblem random_qp(std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 1 + static_cast<int>(gen() % 8);
  const int m = static_cast<int>(gen() % 13);
  QpProblem qp;
  const Eigen::MatrixXd L = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return normal(gen); });
  qp.H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.g = Eigen::VectorXd::NullaryExpr(n, [&]() { return 3.0 * normal(gen); });
  qp.A = Eigen::MatrixXd::NullaryExpr(m, n, [&]() { return normal(gen); });
  const Eigen::VectorXd z0 = Eigen::VectorXd::NullaryExpr(n, [&]() { return normal(gen); });
  const Eigen::VectorXd Az0 = qp.A * z0;
  qp.lower = Eigen::VectorXd::Constant(m, -kQpInfinity);
  qp.upper = Eigen::VectorXd::Constant(m, kQpInfinity);
  int two_sided = 0;
  for (int i = 0; i < m; ++i) {
    const double r = unit(gen);
    if (r < 0.4 || two_sided >= 6) {
      qp.upper(i) = Az0(i) + unit(gen);
    } else if (r < 0.55) {
      qp.lower(i) = Az0(i) - unit(gen);
    } else {
      qp.lower(i) = Az0(i) - unit(gen);
      qp.upper(i) = Az0(i) + unit(gen);
      ++two_sided;
    }
  }
  return qp;
}

}  // namespace

VectorField model_vector_field() {
  return [](const StateVector& x, const InputVector& u, const Params& prm) { return vector_field(x, u, prm); };
}

StateVector random_state(std::mt19937_64& gen) {
  StateVector x;
  x(sx::phi1) = uniform(gen, 0.2, 1.4);
  x(sx::phi2) = x(sx::phi1) + uniform(gen, 0.7, 2.4);
  x(sx::th1) = uniform(gen, -0.4, 0.4);
  x(sx::th2) = uniform(gen, -0.4, 0.4);
  for (int i = sx::dphi1; i <= sx::dth2; ++i) x(i) = uniform(gen, -1.0, 1.0);
  x(sx::fR1) = uniform(gen, 3.0, 20.0);
  x(sx::fR2) = uniform(gen, 3.0, 20.0);
  x(sx::tau1) = uniform(gen, -5.0, 5.0);
  x(sx::tau2) = uniform(gen, -5.0, 5.0);
  return x;
}

CheckResult check_energy(const CheckOptions& opt) {
  constexpr double kTol = 1e-6;
  constexpr double kDt = 1e-4;
  constexpr int kSteps = 20000;
  std::mt19937_64 gen(opt.seed);
  const Params prm;
  const VectorField& field = opt.field;
  double drift = 0.0;
  double balance = 0.0;

  for (int trial = 0; trial < 3; ++trial) {
    StateVector x = random_state(gen);
    x.segment<4>(sx::fR1).setZero();
    const double e0 = mechanical_energy(x, prm);
    const double scale = kinetic_plus_potential_scale(x, prm);
    auto rhs = [&](const StateVector& s, const InputVector& u) { return field(s, u, prm); };
    for (int k = 0; k < kSteps; ++k) x = rk4_step(rhs, x, InputVector::Zero().eval(), kDt);
    drift = std::max(drift, std::abs(mechanical_energy(x, prm) - e0) / scale);
  }

  // Work-energy: integrate the actuation power alongside the state.
  using Extended = Eigen::Matrix<double, kStateDim + 1, 1>;
  for (int trial = 0; trial < 3; ++trial) {
    Extended s;
    s.head<kStateDim>() = random_state(gen);
    s(kStateDim) = 0.0;
    const InputVector u = random_input(gen, 2.0);
    const double e0 = mechanical_energy(StateVector(s.head<kStateDim>()), prm);
    const double scale = kinetic_plus_potential_scale(s.head<kStateDim>(), prm);
    auto rhs = [&](const Extended& v, const InputVector& w) {
      const StateVector x = v.head<kStateDim>();
      Extended out;
      out.head<kStateDim>() = field(x, w, prm);
      out(kStateDim) = actuation_power(x, prm);
      return out;
    };
    for (int k = 0; k < kSteps; ++k) s = rk4_step(rhs, s, u, kDt);
    const double e1 = mechanical_energy(StateVector(s.head<kStateDim>()), prm);
    balance = std::max(balance, std::abs(e1 - e0 - s(kStateDim)) / (scale + std::abs(s(kStateDim))));
  }
  return finish("energy", std::max(drift, balance), kTol,
                fmt::format("relative drift {:.3e}, work-energy mismatch {:.3e}", drift, balance));
}

CheckResult check_jacobian(const CheckOptions& opt) {
  constexpr double kTolPoint = 1e-5;
  constexpr double kTolTraj = 1e-3;
  std::mt19937_64 gen(opt.seed + 1);
  double worst_fx = 0.0;
  double worst_fp = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const Params nominal = apply_deviations(Params{}, random_deviation(gen));
    const StateVector x = random_state(gen);
    const InputVector u = random_input(gen, 50.0);
    const double h = 1e-6;
    StateJacobian<double> fx_fd;
    for (int i = 0; i < kStateDim; ++i) {
      StateVector xp = x;
      StateVector xm = x;
      xp(i) += h;
      xm(i) -= h;
      fx_fd.col(i) = (vector_field(xp, u, nominal) - vector_field(xm, u, nominal)) / (2.0 * h);
    }
    ParamJacobian<double> fp_fd;
    for (int k = 0; k < kParamDim; ++k) {
      const DeviationVector e = DeviationVector::Unit(k) * h;
      fp_fd.col(k) = (vector_field(x, u, apply_deviations(nominal, e)) -
                      vector_field(x, u, apply_deviations(nominal, -e))) /
                     (2.0 * h);
    }
    worst_fx = std::max(worst_fx, (jacobian_fx(x, u, nominal) - fx_fd).norm() / fx_fd.norm());
    worst_fp = std::max(worst_fp, (jacobian_fp(x, u, nominal) - fp_fd).norm() / fp_fd.norm());
  }

  // Pi(t) against central differences of whole rollouts.
  double worst_pi = 0.0;
  const Params nominal;
  constexpr double kTs = 0.01;
  constexpr int kSteps = 100;
  for (int trial = 0; trial < 5; ++trial) {
    const StateVector x0 = random_state(gen);
    const InputVector u = random_input(gen, 5.0);
    AugmentedVector xa = make_augmented(x0, Sensitivity::Zero().eval());
    const double h = 1e-6;
    std::vector<StateVector> xp(kParamDim, x0);
    std::vector<StateVector> xm(kParamDim, x0);
    std::vector<Params> pp;
    std::vector<Params> pm;
    for (int k = 0; k < kParamDim; ++k) {
      pp.push_back(apply_deviations(nominal, DeviationVector::Unit(k) * h));
      pm.push_back(apply_deviations(nominal, -DeviationVector::Unit(k) * h));
    }
    for (int step = 0; step < kSteps; ++step) {
      xa = step_augmented(xa, u, nominal, kTs);
      Sensitivity fd;
      for (int k = 0; k < kParamDim; ++k) {
        xp[k] = step_state(xp[k], u, pp[k], kTs);
        xm[k] = step_state(xm[k], u, pm[k], kTs);
        fd.col(k) = (xp[k] - xm[k]) / (2.0 * h);
      }
      const double denom = std::max(fd.norm(), 1e-12);
      worst_pi = std::max(worst_pi, (sensitivity_block(xa) - fd).norm() / denom);
    }
  }
  const double worst_point = std::max(worst_fx, worst_fp);
  CheckResult r = finish("jacobian", worst_point, kTolPoint,
                         fmt::format("f_x {:.3e}, f_p {:.3e} (tol {:.0e}); Pi rollout {:.3e} (tol {:.0e})",
                                     worst_fx, worst_fp, kTolPoint, worst_pi, kTolTraj));
  r.passed = r.passed && std::isfinite(worst_pi) && worst_pi <= kTolTraj;
  return r;
}

CheckResult check_newton(const CheckOptions& opt) {
  constexpr double kTol = 1e-9;
  std::mt19937_64 gen(opt.seed + 2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Params prm = trial % 2 == 0 ? Params{} : apply_deviations(Params{}, random_deviation(gen));
    const StateVector x = random_state(gen);
    const ChainMotion<double> m = chain_motion(x, prm);
    const Eigen::Vector2d fL = link_stresses(x, prm);
    const Eigen::Vector2d gvec(0.0, -prm.g);
    const Eigen::Vector2d toward_anchor = -m.pos.p1 / prm.l1;
    const Eigen::Vector2d along2 = (m.pos.p2 - m.pos.p1) / prm.l2;
    const Eigen::Vector2d r1 = prm.m1 * m.a1 - x(sx::fR1) * thrust_direction(x(sx::th1)) - prm.m1 * gvec -
                               fL(0) * toward_anchor - fL(1) * along2;
    const Eigen::Vector2d r2 =
        prm.m2 * m.a2 - x(sx::fR2) * thrust_direction(x(sx::th2)) - prm.m2 * gvec + fL(1) * along2;
    worst = std::max({worst, r1.lpNorm<Eigen::Infinity>(), r2.lpNorm<Eigen::Infinity>()});
  }
  return finish("newton", worst, kTol, fmt::format("largest force residual {:.3e} N over 1000 states", worst));
}

Eigen::VectorXd enumerate_qp(const QpProblem& qp) {
  const auto n = qp.H.rows();
  const auto m = qp.A.rows();
  std::vector<int> state(static_cast<std::size_t>(m), 0);  // 0 free, -1 lower, +1 upper
  auto admissible = [&](Eigen::Index i, int s) {
    return s == 0 || (s < 0 ? qp.lower(i) > -kQpInfinity : qp.upper(i) < kQpInfinity);
  };
  for (;;) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (state[static_cast<std::size_t>(i)] != 0) rows.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(rows.size());
    if (k <= n) {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
      Eigen::VectorXd rhs(n + k);
      K.topLeftCorner(n, n) = qp.H;
      rhs.head(n) = -qp.g;
      for (Eigen::Index r = 0; r < k; ++r) {
        const Eigen::Index i = rows[static_cast<std::size_t>(r)];
        K.block(n + r, 0, 1, n) = qp.A.row(i);
        K.block(0, n + r, n, 1) = qp.A.row(i).transpose();
        rhs(n + r) = state[static_cast<std::size_t>(i)] < 0 ? qp.lower(i) : qp.upper(i);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      if (lu.rank() == n + k) {
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd z = sol.head(n);
        const Eigen::VectorXd Az = qp.A * z;
        bool ok = true;
        for (Eigen::Index i = 0; i < m && ok; ++i) ok = Az(i) >= qp.lower(i) - 1e-9 && Az(i) <= qp.upper(i) + 1e-9;
        for (Eigen::Index r = 0; r < k && ok; ++r) {
          const double y = sol(n + r);
          ok = state[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])] < 0 ? y <= 1e-9 : y >= -1e-9;
        }
        if (ok) return z;
      }
    }
    // Next assignment, skipping sides without a finite bound.
    Eigen::Index i = 0;
    for (; i < m; ++i) {
      int& s = state[static_cast<std::size_t>(i)];
      do {
        s = s == 0 ? -1 : (s == -1 ? 1 : 0);
      } while (!admissible(i, s));
      if (s != 0) break;
    }
    if (i == m) return {};
  }
}

CheckResult check_qp(const CheckOptions& opt) {
  constexpr double kTol = 1e-6;
  std::mt19937_64 gen(opt.seed + 3);
  double worst = 0.0;
  int unsolved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const QpProblem qp = random_qp(gen);
    const Eigen::VectorXd expected = enumerate_qp(qp);
    const QpSolution sol = solve_qp(qp);
    if (expected.size() != qp.H.rows() || sol.status != QpStatus::solved) {
      ++unsolved;
      continue;
    }
    worst = std::max(worst, (sol.z - expected).lpNorm<Eigen::Infinity>());
  }
  CheckResult r = finish("qp", worst, kTol,
                         fmt::format("largest deviation {:.3e} over 200 problems, {} unsolved", worst, unsolved));
  r.passed = r.passed && unsolved == 0;
  return r;
}

CheckResult check_ik(const CheckOptions& opt) {
  constexpr double kTol = 1e-10;
  std::mt19937_64 gen(opt.seed + 4);
  const double two_pi = 2.0 * M_PI;

  const EllipseSpec spec;
  const PhaseSample a = quintic_phase(0.0, spec.T);
  const PhaseSample b = quintic_phase(spec.T, spec.T);
  const double endpoint = std::max({std::abs(a.nu), std::abs(a.dnu), std::abs(a.ddnu), std::abs(b.nu - two_pi),
                                    std::abs(b.dnu), std::abs(b.ddnu)});

  double round_trip = 0.0;
  const Params prm;
  const double lo = std::abs(prm.l1 - prm.l2) + spec.eps_r;
  const double hi = prm.l1 + prm.l2 - spec.eps_r;
  for (int trial = 0; trial < 1000; ++trial) {
    const double rho = uniform(gen, lo, hi);
    const double ang = uniform(gen, -M_PI, M_PI);
    const PlanarVec target = rho * PlanarVec(std::cos(ang), std::sin(ang));
    for (ElbowBranch branch : {ElbowBranch::positive, ElbowBranch::negative}) {
      const Eigen::Vector2d phi = two_link_ik(target, prm, branch, spec.eps_r);
      round_trip = std::max(round_trip, (forward_kinematics(phi(0), phi(1), prm).p2 - target).norm());
    }
  }

  // The whole default path must stay inside the margin-reduced annulus.
  const DenseReference dense = build_dense_reference(spec, prm, Eigen::Vector2d(10.0, 10.0));
  double margin = kQpInfinity;
  for (std::size_t i = 0; i < dense.points.size(); ++i) {
    const double rho = dense.position[i].norm();
    margin = std::min({margin, rho - lo, hi - rho});
    const ReferencePoint& r = dense.points[i];
    round_trip = std::max(round_trip, (forward_kinematics(r.phi_d(0), r.phi_d(1), prm).p2 - dense.position[i]).norm());
  }
  const double worst = std::max(endpoint, round_trip);
  CheckResult res = finish("ik", worst, kTol,
                           fmt::format("endpoint error {:.3e}, round trip {:.3e} m, smallest annulus margin {:.4f} m",
                                       endpoint, round_trip, margin));
  res.passed = res.passed && margin >= 0.0;
  return res;
}

std::vector<std::string> check_suite_names() { return {"energy", "jacobian", "newton", "qp", "ik"}; }

std::vector<CheckResult> run_checks(const std::vector<std::string>& suites, const CheckOptions& opt) {
  if (suites.empty()) throw std::invalid_argument("no check suite selected");
  const std::vector<std::string> known = check_suite_names();
  for (const std::string& s : suites) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw std::invalid_argument("unknown check suite '" + s + "'");
    }
  }
  std::vector<CheckResult> out;
  for (const std::string& s : suites) {
    if (s == "energy") out.push_back(check_energy(opt));
    if (s == "jacobian") out.push_back(check_jacobian(opt));
    if (s == "newton") out.push_back(check_newton(opt));
    if (s == "qp") out.push_back(check_qp(opt));
    if (s == "ik") out.push_back(check_ik(opt));
  }
  return out;
}

}  // namespace chainmpc
