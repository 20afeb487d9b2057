#include "chainmpc/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace chainmpc {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxIkCondition = 1e8;

std::string annulus_message(double rho, double lo, double hi) {
  std::ostringstream os;
  os << "target radius " << rho << " m outside reachable annulus [" << lo << ", " << hi << "] m";
  return os.str();
}
}  // namespace

void validate(const EllipseSpec& s) {
  if (!(s.ax > 0.0 && s.az > 0.0)) throw std::invalid_argument("ellipse semi-axes must be positive");
  if (!(s.T > 0.0)) throw std::invalid_argument("reference duration T must be positive");
  if (!(s.eps_r >= 0.0)) throw std::invalid_argument("reachability margin eps_r must be >= 0");
}

PhaseSample quintic_phase(double t, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("quintic_phase needs T > 0");
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= T) return {kTwoPi, 0.0, 0.0};
  const double s = t / T;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return {kTwoPi * (10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2),
          kTwoPi * (30.0 * s2 - 60.0 * s3 + 30.0 * s3 * s) / T,
          kTwoPi * (60.0 * s - 180.0 * s2 + 120.0 * s3) / (T * T)};
}

PathSample ellipse_point(const EllipseSpec& spec, const PhaseSample& ph) {
  const double c = std::cos(ph.nu);
  const double s = std::sin(ph.nu);
  PathSample out;
  out.pos = {spec.xc + spec.ax * c, spec.zc + spec.az * s};
  out.vel = {-spec.ax * s * ph.dnu, spec.az * c * ph.dnu};
  out.acc = {-spec.ax * (c * ph.dnu * ph.dnu + s * ph.ddnu), spec.az * (-s * ph.dnu * ph.dnu + c * ph.ddnu)};
  return out;
}

UnreachableTarget::UnreachableTarget(double r, double lo, double hi)
    : std::domain_error(annulus_message(r, lo, hi)), rho(r), rho_min(lo), rho_max(hi) {}

Eigen::Vector2d two_link_ik(const PlanarVec& target, const Params& prm, ElbowBranch branch, double eps_r) {
  const double rho = target.norm();
  const double lo = std::abs(prm.l1 - prm.l2) + eps_r;
  const double hi = prm.l1 + prm.l2 - eps_r;
  if (!(rho >= lo && rho <= hi)) throw UnreachableTarget(rho, lo, hi);
  const double c = std::clamp((rho * rho - prm.l1 * prm.l1 - prm.l2 * prm.l2) / (2.0 * prm.l1 * prm.l2), -1.0, 1.0);
  double rel = std::acos(c);
  if (branch == ElbowBranch::negative) rel = -rel;
  const double phi1 = std::atan2(target.y(), target.x()) -
                      std::atan2(prm.l2 * std::sin(rel), prm.l1 + prm.l2 * std::cos(rel));
  return {phi1, phi1 + rel};
}

IkRates ik_derivatives(const Eigen::Vector2d& phi, const PlanarVec& vel, const PlanarVec& acc, const Params& prm) {
  const Eigen::Vector2d e1(std::cos(phi(0)), std::sin(phi(0)));
  const Eigen::Vector2d e2(std::cos(phi(1)), std::sin(phi(1)));
  Eigen::Matrix2d J;
  J.col(0) = prm.l1 * Eigen::Vector2d(-e1.y(), e1.x());
  J.col(1) = prm.l2 * Eigen::Vector2d(-e2.y(), e2.x());
  const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::Matrix2d>(J).singularValues();
  if (!(sv(1) > 0.0) || sv(0) / sv(1) > kMaxIkCondition) {
    throw std::domain_error("inverse-kinematics Jacobian is singular (links aligned or folded)");
  }
  IkRates r;
  r.dphi = J.partialPivLu().solve(vel);
  const Eigen::Vector2d jdot_qdot = -prm.l1 * r.dphi(0) * r.dphi(0) * e1 - prm.l2 * r.dphi(1) * r.dphi(1) * e2;
  r.ddphi = J.partialPivLu().solve(acc - jdot_qdot);
  return r;
}

Eigen::Matrix<double, kOutputDim, 1> ReferencePoint::stage() const {
  Eigen::Matrix<double, kOutputDim, 1> r;
  r << phi_d, fL_d, dphi_d, ddphi_d;
  return r;
}

Eigen::Matrix<double, kTerminalOutputDim, 1> ReferencePoint::terminal() const {
  Eigen::Matrix<double, kTerminalOutputDim, 1> r;
  r << phi_d, fL_d;
  return r;
}

ReferencePoint DenseReference::at(double time) const {
  if (points.empty()) throw std::logic_error("empty reference");
  if (time <= t.front()) return points.front();
  if (time >= t.back()) return points.back();
  const double pos = (time - t.front()) / dt;
  auto i = static_cast<std::size_t>(std::floor(pos));
  double w = pos - static_cast<double>(i);
  // Snap to grid points within rounding of the grid spacing.
  if (w < 1e-9) w = 0.0;
  if (w > 1.0 - 1e-9) {
    ++i;
    w = 0.0;
  }
  if (w == 0.0 || i + 1 >= points.size()) return points[std::min(i, points.size() - 1)];
  const ReferencePoint& a = points[i];
  const ReferencePoint& b = points[i + 1];
  ReferencePoint r;
  r.phi_d = (1.0 - w) * a.phi_d + w * b.phi_d;
  r.fL_d = (1.0 - w) * a.fL_d + w * b.fL_d;
  r.dphi_d = (1.0 - w) * a.dphi_d + w * b.dphi_d;
  r.ddphi_d = (1.0 - w) * a.ddphi_d + w * b.ddphi_d;
  return r;
}

DenseReference build_dense_reference(const EllipseSpec& spec, const Params& prm, const Eigen::Vector2d& fL_d,
                                     double dt) {
  validate(spec);
  validate(prm);
  if (!(dt > 0.0)) throw std::invalid_argument("reference step dt must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(spec.T / dt));
  DenseReference out;
  out.dt = dt;
  out.t.reserve(steps + 1);
  out.points.reserve(steps + 1);
  out.position.reserve(steps + 1);

  Eigen::Vector2d previous = Eigen::Vector2d::Zero();
  for (std::size_t j = 0; j <= steps; ++j) {
    const double t = static_cast<double>(j) * dt;
    const PathSample path = ellipse_point(spec, quintic_phase(t, spec.T));
    Eigen::Vector2d phi = two_link_ik(path.pos, prm, ElbowBranch::positive, spec.eps_r);
    if (j > 0) {
      // Keep the angle history continuous across atan2 branch cuts.
      const double shift = kTwoPi * std::round((previous(0) - phi(0)) / kTwoPi);
      phi.array() += shift;
    }
    previous = phi;
    const IkRates rates = ik_derivatives(phi, path.vel, path.acc, prm);
    ReferencePoint r;
    r.phi_d = phi;
    r.fL_d = fL_d;
    r.dphi_d = rates.dphi;
    r.ddphi_d = rates.ddphi;
    out.t.push_back(t);
    out.position.push_back(path.pos);
    out.points.push_back(r);
  }
  return out;
}

HorizonReference build_reference(const DenseReference& dense, double t_k, double Ts, int N) {
  if (N < 1 || !(Ts > 0.0)) throw std::invalid_argument("horizon needs N >= 1 and Ts > 0");
  HorizonReference h;
  h.stages.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) h.stages.push_back(dense.at(t_k + i * Ts));
  h.terminal = dense.at(t_k + N * Ts).terminal();
  return h;
}

HorizonReference build_reference(const EllipseSpec& spec, const Params& prm, const Eigen::Vector2d& fL_d,
                                 double t_k, double Ts, int N) {
  return build_reference(build_dense_reference(spec, prm, fL_d), t_k, Ts, N);
}

void write_reference_csv(std::ostream& os, const DenseReference& d) {
  os << "t,x_d,z_d,phi1_d,phi2_d,dphi1_d,dphi2_d,ddphi1_d,ddphi2_d,fL1_d,fL2_d\n";
  for (std::size_t j = 0; j < d.t.size(); ++j) {
    const ReferencePoint& r = d.points[j];
    os << fmt::format("{:.3f},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                      d.t[j], d.position[j].x(), d.position[j].y(), rad2deg(r.phi_d(0)), rad2deg(r.phi_d(1)),
                      rad2deg(r.dphi_d(0)), rad2deg(r.dphi_d(1)), rad2deg(r.ddphi_d(0)), rad2deg(r.ddphi_d(1)),
                      r.fL_d(0), r.fL_d(1));
  }
}

}  // namespace chainmpc
