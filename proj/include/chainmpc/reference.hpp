#pragma once

#include "chainmpc/types.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace chainmpc {

/// Ellipse x = xc + ax cos(nu), z = zc + az sin(nu) traversed once over [0, T].
struct EllipseSpec {
  double xc{0.0};
  double zc{1.05};
  double ax{0.55};
  double az{0.35};
  double T{12.0};
  double eps_r{0.02};
};

void validate(const EllipseSpec& spec);

struct PhaseSample {
  double nu{0.0};
  double dnu{0.0};
  double ddnu{0.0};
};

/// nu = 2 pi (10 s^3 - 15 s^4 + 6 s^5), s = t / T; t is clamped to [0, T].
PhaseSample quintic_phase(double t, double T);

struct PathSample {
  PlanarVec pos;
  PlanarVec vel;
  PlanarVec acc;
};

PathSample ellipse_point(const EllipseSpec& spec, const PhaseSample& phase);

/// Elbow branch, identified by the sign of phi2 - phi1.
enum class ElbowBranch { positive, negative };

/// Thrown when a target lies outside the reachable annulus (minus margin).
class UnreachableTarget : public std::domain_error {
 public:
  UnreachableTarget(double rho, double rho_min, double rho_max);
  double rho;
  double rho_min;
  double rho_max;
};

/// Elevation angles placing the second vehicle at target.
Eigen::Vector2d two_link_ik(const PlanarVec& target, const Params& prm, ElbowBranch branch,
                            double eps_r = 0.0);

struct IkRates {
  Eigen::Vector2d dphi;
  Eigen::Vector2d ddphi;
};

/// phidot = J^{-1} v, phiddot = J^{-1} (a - Jdot phidot) with J = dp2/dphi.
IkRates ik_derivatives(const Eigen::Vector2d& phi, const PlanarVec& vel, const PlanarVec& acc,
                       const Params& prm);

/// Output reference in the order [phi; f_L; phidot; phiddot].
struct ReferencePoint {
  Eigen::Vector2d phi_d = Eigen::Vector2d::Zero();
  Eigen::Vector2d fL_d = Eigen::Vector2d::Zero();
  Eigen::Vector2d dphi_d = Eigen::Vector2d::Zero();
  Eigen::Vector2d ddphi_d = Eigen::Vector2d::Zero();

  Eigen::Matrix<double, kOutputDim, 1> stage() const;
  Eigen::Matrix<double, kTerminalOutputDim, 1> terminal() const;
};

/// The reference sampled on a uniform grid (200 Hz by default).
struct DenseReference {
  double dt{0.005};
  std::vector<double> t;
  std::vector<PlanarVec> position;
  std::vector<ReferencePoint> points;

  /// Linear interpolation on the grid, clamped to the end points.
  ReferencePoint at(double time) const;
};

DenseReference build_dense_reference(const EllipseSpec& spec, const Params& prm, const Eigen::Vector2d& fL_d,
                                     double dt = 0.005);

/// Stage references r_0..r_{N-1} and the terminal r_N on the controller grid.
struct HorizonReference {
  std::vector<ReferencePoint> stages;
  Eigen::Matrix<double, kTerminalOutputDim, 1> terminal;
};

HorizonReference build_reference(const DenseReference& dense, double t_k, double Ts, int N);

HorizonReference build_reference(const EllipseSpec& spec, const Params& prm, const Eigen::Vector2d& fL_d,
                                 double t_k, double Ts, int N);

/// CSV: t, x_d, z_d, phi1_d, phi2_d, dphi1_d, dphi2_d, ddphi1_d, ddphi2_d, fL1_d, fL2_d (angles in deg).
void write_reference_csv(std::ostream& os, const DenseReference& dense);

}  // namespace chainmpc
