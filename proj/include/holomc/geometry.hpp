#pragma once

#include <Eigen/Dense>
#include <map>
#include <mutex>
#include <vector>

#include "holomc/errors.hpp"

namespace holomc {

using Point = Eigen::VectorXd;

enum class ManifoldKind { Circle, FlatTorus, Sphere2 };

/// Catalog manifold with exact geodesics, distances and heat kernels.
/// Circle of circumference L is stored as the 1-d lattice [L]; the flat torus
/// carries an arbitrary nonsingular lattice basis B (points live in B*[0,1)^n);
/// the sphere is the unit round 2-sphere with points as unit vectors in R^3.
struct Manifold {
  ManifoldKind kind = ManifoldKind::Circle;
  int dim = 1;
  Eigen::MatrixXd basis;      // n x n lattice basis, flat members only
  Eigen::MatrixXd basis_inv;  // cached inverse
  double min_singular = 0.0;  // smallest singular value of basis

  static Manifold circle(double circumference);
  static Manifold flat_torus(const Eigen::MatrixXd& lattice_basis);
  static Manifold sphere2();

  bool flat() const { return kind != ManifoldKind::Sphere2; }
  int ambient_dim() const { return flat() ? dim : 3; }
  double volume() const;
};

/// Unique minimal geodesic between two points at distance < rho.
struct GeodesicSegment {
  Point p, q;
  Point velocity;  // initial velocity; constant-speed parameterization on [0,1]
  double length = 0.0;

  /// Point at parameter t in [0,1]; eval(0)=p, eval(1)=q.
  Point eval(const Manifold& M, double t) const;
};

// -- points ------------------------------------------------------------------

/// Reduce ambient coordinates to the fundamental-domain representative
/// (torus: B*[0,1)^n; sphere: normalize to unit length).
Point reduce_point(const Manifold& M, const Point& x);

bool valid_point(const Manifold& M, const Point& x, double tol = 1e-9);

/// Shortest ambient increment from p to q over lattice images (flat members).
Point nearest_increment(const Manifold& M, const Point& p, const Point& q);

// -- metric ------------------------------------------------------------------

double distance(const Manifold& M, const Point& p, const Point& q);
double injectivity_radius(const Manifold& M);
double rho(const Manifold& M);  // = injectivity_radius / 2

/// Point on the unique minimal geodesic from p to q; throws DistanceTooLarge
/// when d(p,q) >= rho.
Point interpolate(const Manifold& M, const Point& p, const Point& q, double t);

/// Minimal geodesic as a segment object; same precondition as interpolate.
GeodesicSegment geodesic(const Manifold& M, const Point& p, const Point& q);

// -- heat kernel -------------------------------------------------------------

struct HeatKernelResult {
  double value = 0.0;
  double tail_bound = 0.0;  // certified bound on the omitted part of the sum
};

/// Heat kernel of the Laplace operator, convention dp/ds = Lap p, i.e.
/// p_s ~ (4 pi s)^{-n/2} exp(-d^2/4s).  Flat members by lattice image sum,
/// sphere by spectral sum; both truncated so the omitted tail is below tol.
HeatKernelResult heat_kernel_certified(const Manifold& M, double s, const Point& p,
                                       const Point& q, double tol = 1e-12);

double heat_kernel(const Manifold& M, double s, const Point& p, const Point& q,
                   double tol = 1e-12);

/// p_1(x,x), cached per base point.
class DiagonalKernelCache {
 public:
  explicit DiagonalKernelCache(const Manifold& M) : manifold_(M) {}
  double value(const Point& x);

 private:
  Manifold manifold_;
  std::map<std::vector<double>, double> cache_;
  std::mutex mu_;
};

double heat_kernel_diagonal_total(const Manifold& M, const Point& x);

}  // namespace holomc
