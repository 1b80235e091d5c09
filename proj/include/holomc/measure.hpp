#pragma once

#include <cstdint>
#include <vector>

#include "holomc/transport.hpp"

namespace holomc {

struct MeasureAtom {
  HolonomyElement h;
  double weight = 0.0;
};

enum class MeasureKind { Empirical, Analytic };

struct MeasureMeta {
  int m = 0;
  long long samples = 0;
  std::uint64_t seed = 0;
  double deficit = 0.0;  // rejection / omitted-tail mass
};

/// Probability measure on O(r), stored as weighted atoms.  `u1` marks that
/// every atom carries the angle view, enabling exact circle distances.
struct HolonomyMeasure {
  MeasureKind kind = MeasureKind::Empirical;
  int rank = 2;
  bool u1 = false;
  std::vector<MeasureAtom> atoms;
  MeasureMeta meta;
};

/// Rotation by 2 pi angle with the angle view attached.
HolonomyElement u1_element(double angle);

/// Self-normalized atom measure from weighted samples.
HolonomyMeasure empirical_measure(const std::vector<MeasureAtom>& samples);

/// Closed-form measure of a flat U(1) connection: atoms at theta . nu mod 1
/// with winding weights, angle collisions aggregated.  `tail` bounds the
/// omitted winding mass (recorded in meta.deficit).
HolonomyMeasure analytic_flat_u1(const Manifold& M, const FlatU1Form& F, double tail = 1e-12);

/// Merge atoms whose angles agree within `tol` arc-length (tol = 0 merges
/// exact collisions only); output sorted by angle.
HolonomyMeasure aggregate_angles(const HolonomyMeasure& mu, double tol = 0.0);

/// Bounded-Lipschitz style distance: exact 1-Wasserstein in arc-length units
/// when both measures are U(1), otherwise the max expectation gap over a
/// fixed dictionary of Lipschitz-1 matrix test functions.
double bl_distance(const HolonomyMeasure& mu, const HolonomyMeasure& nu);

/// Total mass with angle in (eps, 1 - eps).
double arc_mass(const HolonomyMeasure& mu, double eps);

struct SupportCluster {
  HolonomyElement center;
  double mass = 0.0;
};

/// Single-linkage clustering of atoms (arc distance on U(1), Frobenius
/// otherwise) at threshold merge_tol; centers are weighted means projected
/// back to the group.
std::vector<SupportCluster> support_estimate(const HolonomyMeasure& mu, double merge_tol);

struct U1Histogram {
  int bins = 0;
  std::vector<double> mass;  // bin b covers [b/bins, (b+1)/bins)
};

U1Histogram u1_histogram(const HolonomyMeasure& mu, int bins);

}  // namespace holomc
