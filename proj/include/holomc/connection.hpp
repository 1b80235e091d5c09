#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "holomc/geometry.hpp"

namespace holomc {

/// 2x2 generator of the complex structure (i as a real matrix).
inline Eigen::Matrix2d symplectic_j() {
  Eigen::Matrix2d J;
  J << 0.0, -1.0, 1.0, 0.0;
  return J;
}

enum class ConnectionType { Trivial, FlatU1, SinForm, LeviCivitaSphere };

/// Closed U(1) form on a flat member: holonomy periods per lattice generator
/// plus an optional exact (zero-period) oscillatory part.
struct FlatU1Form {
  Eigen::VectorXd periods;  // raw reals; reduced mod 1 only when reporting angles
  double osc_amplitude = 0.0;
};

/// Metric connection on a rank-r bundle over a catalog manifold.  All catalog
/// members are rank 2; the U(1) ones carry the complex structure J.
struct MetricConnection {
  Manifold manifold;
  ConnectionType type = ConnectionType::Trivial;
  int rank = 2;
  FlatU1Form u1;           // FlatU1 only
  double sin_amplitude = 0.0;  // SinForm only

  static MetricConnection trivial(const Manifold& M);
  static MetricConnection flat_u1(const Manifold& M, const Eigen::VectorXd& periods,
                                  double osc_amplitude = 0.0);
  static MetricConnection sin_form(const Manifold& M, double amplitude);
  static MetricConnection levi_civita_sphere();

  bool is_u1() const { return type != ConnectionType::LeviCivitaSphere; }
  bool is_flat_u1() const { return type == ConnectionType::Trivial || type == ConnectionType::FlatU1; }
};

/// Coefficient matrices Gamma_i(x), one per ambient coordinate direction on
/// flat members; (theta, phi) directions in the standard z-pole chart on the
/// sphere.  Throws ChartUndefined at the sphere chart poles.
std::vector<Eigen::MatrixXd> evaluate_gamma(const MetricConnection& C, const Point& x);

/// Curvature values F_ij(x) for index pairs i<j, same index convention as
/// evaluate_gamma.  Analytic for all catalog forms.
std::vector<Eigen::MatrixXd> curvature(const MetricConnection& C, const Point& x);

/// Finite-difference curvature with step h; flat members only (single chart).
std::vector<Eigen::MatrixXd> curvature_fd(const MetricConnection& C, const Point& x,
                                          double h = 1e-5);

/// theta_nu = sum_j nu_j theta_j mod 1, in [0,1).
double flat_u1_holonomy_angle(const FlatU1Form& F, const Eigen::VectorXi& winding);

/// Declared C0-convergent family Gamma^t = base + t * delta along a schedule
/// of t values decreasing to 0.
struct ConnectionFamily {
  MetricConnection base;   // the t=0 limit member
  MetricConnection delta;  // same type as base (or FlatU1 over a Trivial base)
  std::vector<double> schedule;

  MetricConnection member(double t) const;
};

/// sup over a point grid of the coefficient deviation ||Gamma^t - Gamma^0||.
double family_c0_deviation(const ConnectionFamily& fam, double t, int grid_per_dim = 100);

}  // namespace holomc
