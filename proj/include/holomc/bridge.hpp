#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "holomc/geometry.hpp"
#include "holomc/rng.hpp"

namespace holomc {

/// Vertex tuple (x_1, ..., x_{m-1}) of a candidate loop based at x, with its
/// importance weight (1 for exact samplers).  The exact torus sampler also
/// records the homotopy class it conditioned on.
struct LoopVertices {
  Point base;
  int m = 0;  // power of two >= 2
  std::vector<Point> vertices;  // size m-1
  double weight = 1.0;
  std::optional<Eigen::VectorXi> drawn_winding;
};

struct PiecewiseGeodesicLoop {
  Point base;
  int m = 0;
  std::vector<Point> vertices;          // x_0 .. x_m with x_0 = x_m = base
  std::vector<GeodesicSegment> segments;  // size m
  double total_length() const;
};

/// Lattice winding class of a torus/circle loop; empty vector marks the
/// trivial class on the sphere.
using WindingClass = Eigen::VectorXi;

/// Truncated table of winding atoms nu with masses w_nu = e^{-|B nu|^2/4} / Z
/// (Eq. component masses through the universal cover); omitted tail < tail_tol.
struct WindingTable {
  std::vector<Eigen::VectorXi> atoms;
  std::vector<double> weights;  // normalized
  double omitted_mass = 0.0;
};

WindingTable winding_table(const Manifold& M, double tail_tol = 1e-12);

/// Exact pinned-bridge sampler on flat members: draw the winding from the
/// component masses, then a Euclidean Gaussian bridge (step variance 2/m) to
/// the lifted endpoint, projected to the torus.  Weight 1.
LoopVertices sample_bridge_torus(const Manifold& M, const Point& x, int m, RngStream& rng);

/// Importance sampler on any catalog member: sequential forward heat-kernel
/// walk with the closing factor p_{1/m}(x_{m-1}, x) / p_1(x, x) as weight.
LoopVertices sample_bridge_is(const Manifold& M, const Point& x, int m, RngStream& rng);

/// Membership in Lambda_g^m: all consecutive distances strictly below rho.
bool admissible(const Manifold& M, const LoopVertices& v, double rho_value);

/// Accept/reject bookkeeping for a run.
struct RejectionCounter {
  long long attempted = 0;
  long long accepted = 0;
  long long rejected = 0;
  double rate() const { return attempted ? static_cast<double>(rejected) / attempted : 0.0; }
};

/// The map Phi_m: vertex tuple to piecewise-geodesic loop.  Requires
/// admissibility; throws DistanceTooLarge otherwise.
PiecewiseGeodesicLoop build_loop(const Manifold& M, const LoopVertices& v);

/// Insert geodesic midpoints: the Lambda^{2m} representative of the same loop.
LoopVertices refine_midpoints(const Manifold& M, const LoopVertices& v);

/// Winding class via nearest-image lifted increments; throws LiftDefect if
/// the lift sum misses the lattice by >= 1e-9.
WindingClass winding_class(const Manifold& M, const PiecewiseGeodesicLoop& loop);

}  // namespace holomc
