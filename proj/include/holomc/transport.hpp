#pragma once

#include <Eigen/Dense>

#include "holomc/bridge.hpp"
#include "holomc/connection.hpp"

namespace holomc {

using Frame = Eigen::MatrixXd;  // columns = transported basis of the fibre

/// Nearest orthogonal matrix (polar factor).
Eigen::MatrixXd polar_project(const Eigen::MatrixXd& Q);

/// Value of the transport around a loop.
struct HolonomyElement {
  Eigen::MatrixXd Q;       // r x r, orthogonal to 1e-9
  bool has_u1 = false;
  double angle = 0.0;      // U(1) view, in [0,1), when has_u1

  double orthogonality_defect() const {
    return (Q.transpose() * Q - Eigen::MatrixXd::Identity(Q.rows(), Q.cols())).norm();
  }
};

double rotation_angle(const Eigen::MatrixXd& Q);  // atan2 view in [0,1)

/// RK4 integration of Q' = -Gamma<gdot> Q along one geodesic segment, with
/// polar re-orthonormalization at the end.  On the sphere the result maps
/// canonical-frame components at seg.p to canonical-frame components at seg.q.
Frame transport_segment(const MetricConnection& C, const GeodesicSegment& seg, const Frame& Q,
                        int steps);

int default_steps(const GeodesicSegment& seg);  // max(8, ceil(length/0.01))

/// Composition of segment transports from the identity frame; //_1 of Phi_m.
HolonomyElement holonomy(const MetricConnection& C, const PiecewiseGeodesicLoop& loop,
                         int steps_per_segment = 0 /* 0 = auto */);

/// Exact per-segment line integral route for U(1) connections on flat
/// members; closed form for the catalog forms, Gauss-Legendre otherwise.
HolonomyElement holonomy_u1_exact(const MetricConnection& C, const PiecewiseGeodesicLoop& loop);

/// |holonomy(loop) - exp(-int_D F)| for a contractible loop, disc by coning
/// the lifted loop to the base point.  Throws NotContractible for winding != 0.
double stokes_check(const MetricConnection& C, const PiecewiseGeodesicLoop& loop,
                    int steps_per_segment = 0);

enum class ItoCorrection {
  AsPrinted,  // drift 2 sum_i Gamma_i Gamma_i, the equation as published
  Derived     // drift sum_i (d_i Gamma_i - Gamma_i Gamma_i), chain-rule conversion
};

/// Euler-Maruyama cross-check on flat members: the bridge increments refined
/// to `substeps` Brownian sub-steps per partition interval, Ito drift applied
/// per the chosen convention, endpoint polar-projected.
HolonomyElement transport_ito_euler(const MetricConnection& C, const LoopVertices& v,
                                    int substeps, RngStream& rng,
                                    ItoCorrection correction = ItoCorrection::AsPrinted);

// Sphere chart utilities (exposed for tests).
struct SphereChart {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // chart coords y = R x; poles at y3 = +-1

  double colatitude(const Eigen::Vector3d& x) const;
  /// frame vectors e_theta, e_phi in ambient coordinates
  void frame(const Eigen::Vector3d& x, Eigen::Vector3d& e_th, Eigen::Vector3d& e_ph) const;
};

/// Canonical reference frame at a sphere point: z-pole chart away from the
/// z-poles, x-pole chart inside the 0.2 rad caps.
SphereChart canonical_chart(const Eigen::Vector3d& x);

/// Rotation angle (radians) taking components in chart a's frame to chart b's
/// frame at x.
double frame_change_angle(const SphereChart& a, const SphereChart& b, const Eigen::Vector3d& x);

}  // namespace holomc
