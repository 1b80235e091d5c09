#include "holomc/connection.hpp"

#include <cmath>

namespace holomc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Eigen::VectorXd lattice_coords(const Manifold& M, const Point& x) {
  return M.basis_inv * x;
}
}  // namespace

MetricConnection MetricConnection::trivial(const Manifold& M) {
  MetricConnection C;
  C.manifold = M;
  C.type = ConnectionType::Trivial;
  return C;
}

MetricConnection MetricConnection::flat_u1(const Manifold& M, const Eigen::VectorXd& periods,
                                           double osc_amplitude) {
  if (!M.flat()) throw ConfigError("flat_u1 lives on flat members");
  if (periods.size() != M.dim) throw ConfigError("flat_u1: one period per lattice generator");
  MetricConnection C;
  C.manifold = M;
  C.type = ConnectionType::FlatU1;
  C.u1.periods = periods;
  C.u1.osc_amplitude = osc_amplitude;
  return C;
}

MetricConnection MetricConnection::sin_form(const Manifold& M, double amplitude) {
  if (!M.flat() || M.dim < 2) throw ConfigError("sin_form needs a flat torus of dim >= 2");
  MetricConnection C;
  C.manifold = M;
  C.type = ConnectionType::SinForm;
  C.sin_amplitude = amplitude;
  return C;
}

MetricConnection MetricConnection::levi_civita_sphere() {
  MetricConnection C;
  C.manifold = Manifold::sphere2();
  C.type = ConnectionType::LeviCivitaSphere;
  return C;
}

std::vector<Eigen::MatrixXd> evaluate_gamma(const MetricConnection& C, const Point& x) {
  const Eigen::Matrix2d J = symplectic_j();
  if (C.type == ConnectionType::LeviCivitaSphere) {
    const double cost = x[2];
    const double sint = std::sqrt(std::max(0.0, 1.0 - cost * cost));
    if (sint < 1e-8)
      throw ChartUndefined("sphere frame undefined at chart pole; rotate the frame");
    // (theta, phi) directions in the z-pole chart
    return {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd(cost * J)};
  }
  const Manifold& M = C.manifold;
  const int n = M.dim;
  std::vector<Eigen::MatrixXd> gam(n, Eigen::MatrixXd::Zero(2, 2));
  if (C.type == ConnectionType::Trivial) return gam;
  if (C.type == ConnectionType::FlatU1) {
    const Eigen::VectorXd u = lattice_coords(M, x);
    for (int i = 0; i < n; ++i) {
      double c = 0.0;
      for (int j = 0; j < n; ++j) c += -kTwoPi * C.u1.periods[j] * M.basis_inv(j, i);
      c += C.u1.osc_amplitude * kTwoPi * std::cos(kTwoPi * u[0]) * M.basis_inv(0, i);
      gam[i] = c * J;
    }
    return gam;
  }
  // SinForm: a sin(2 pi u^1) J du^2
  const Eigen::VectorXd u = lattice_coords(M, x);
  const double a = C.sin_amplitude * std::sin(kTwoPi * u[0]);
  for (int i = 0; i < n; ++i) gam[i] = a * M.basis_inv(1, i) * J;
  return gam;
}

std::vector<Eigen::MatrixXd> curvature(const MetricConnection& C, const Point& x) {
  const Eigen::Matrix2d J = symplectic_j();
  if (C.type == ConnectionType::LeviCivitaSphere) {
    const double cost = x[2];
    const double sint = std::sqrt(std::max(0.0, 1.0 - cost * cost));
    return {Eigen::MatrixXd(-sint * J)};  // F_{theta phi}
  }
  const Manifold& M = C.manifold;
  const int n = M.dim;
  std::vector<Eigen::MatrixXd> F;
  F.reserve(n * (n - 1) / 2);
  if (C.type == ConnectionType::SinForm) {
    const Eigen::VectorXd u = lattice_coords(M, x);
    const double c = C.sin_amplitude * kTwoPi * std::cos(kTwoPi * u[0]);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        F.push_back(c * (M.basis_inv(0, i) * M.basis_inv(1, j) -
                         M.basis_inv(0, j) * M.basis_inv(1, i)) * J);
    return F;
  }
  // Trivial and FlatU1 are flat; exact zero, including the oscillatory part
  // (an exact form has symmetric mixed partials).
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) F.push_back(Eigen::MatrixXd::Zero(2, 2));
  return F;
}

std::vector<Eigen::MatrixXd> curvature_fd(const MetricConnection& C, const Point& x, double h) {
  if (C.type == ConnectionType::LeviCivitaSphere)
    throw ConfigError("curvature_fd: flat members only");
  const Manifold& M = C.manifold;
  const int n = M.dim;
  // central differences of the coefficient field in ambient coordinates
  std::vector<std::vector<Eigen::MatrixXd>> dgam(n);
  for (int i = 0; i < n; ++i) {
    Point xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const auto gp = evaluate_gamma(C, reduce_point(M, xp));
    const auto gm = evaluate_gamma(C, reduce_point(M, xm));
    dgam[i].resize(n);
    for (int j = 0; j < n; ++j) dgam[i][j] = (gp[j] - gm[j]) / (2.0 * h);
  }
  const auto g = evaluate_gamma(C, x);
  std::vector<Eigen::MatrixXd> F;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      F.push_back(dgam[i][j] - dgam[j][i] + g[i] * g[j] - g[j] * g[i]);
  return F;
}

double flat_u1_holonomy_angle(const FlatU1Form& F, const Eigen::VectorXi& winding) {
  double a = 0.0;
  for (int j = 0; j < winding.size(); ++j) a += winding[j] * F.periods[j];
  a -= std::floor(a);
  if (a >= 1.0) a = 0.0;
  return a;
}

MetricConnection ConnectionFamily::member(double t) const {
  MetricConnection C = base;
  const ConnectionType bt = base.type;
  const ConnectionType dt = delta.type;
  if (dt == ConnectionType::Trivial) return C;
  if (dt == ConnectionType::FlatU1 &&
      (bt == ConnectionType::Trivial || bt == ConnectionType::FlatU1)) {
    Eigen::VectorXd p0 = (bt == ConnectionType::FlatU1)
                             ? base.u1.periods
                             : Eigen::VectorXd::Zero(base.manifold.dim).eval();
    const double o0 = (bt == ConnectionType::FlatU1) ? base.u1.osc_amplitude : 0.0;
    return MetricConnection::flat_u1(base.manifold, p0 + t * delta.u1.periods,
                                     o0 + t * delta.u1.osc_amplitude);
  }
  if (dt == ConnectionType::SinForm &&
      (bt == ConnectionType::Trivial || bt == ConnectionType::SinForm)) {
    const double a0 = (bt == ConnectionType::SinForm) ? base.sin_amplitude : 0.0;
    return MetricConnection::sin_form(base.manifold, a0 + t * delta.sin_amplitude);
  }
  throw ConfigError("unsupported family base/delta combination");
}

double family_c0_deviation(const ConnectionFamily& fam, double t, int grid_per_dim) {
  const Manifold& M = fam.base.manifold;
  if (!M.flat()) throw ConfigError("family_c0_deviation: flat members only");
  const MetricConnection Ct = fam.member(t);
  const MetricConnection C0 = fam.base;
  double worst = 0.0;
  const int n = M.dim;
  std::vector<int> idx(n, 0);
  while (true) {
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u[i] = static_cast<double>(idx[i]) / grid_per_dim;
    const Point x = M.basis * u;
    const auto gt = evaluate_gamma(Ct, x);
    const auto g0 = evaluate_gamma(C0, x);
    double dev = 0.0;
    for (int i = 0; i < n; ++i) dev += (gt[i] - g0[i]).norm();
    worst = std::max(worst, dev);
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[i] < grid_per_dim) break;
      idx[i] = 0;
    }
    if (i == n) break;
  }
  return worst;
}

}  // namespace holomc
