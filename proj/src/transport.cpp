#include "holomc/transport.hpp"

#include <cmath>
#include <functional>

namespace holomc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kPoleCap = 0.2;  // rad; switch charts inside this cap

Eigen::Matrix2d rot2(double a) {
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

Eigen::MatrixXd rk4_transport(const std::function<Eigen::MatrixXd(double)>& G, int rank,
                              int steps, const Eigen::MatrixXd& Q0) {
  Eigen::MatrixXd Q = Q0;
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const Eigen::MatrixXd G1 = -G(t);
    const Eigen::MatrixXd Gm = -G(t + 0.5 * h);
    const Eigen::MatrixXd G2 = -G(t + h);
    const Eigen::MatrixXd k1 = G1 * Q;
    const Eigen::MatrixXd k2 = Gm * (Q + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = Gm * (Q + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = G2 * (Q + h * k3);
    Q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  (void)rank;
  return Q;
}

// --- sphere chart handling --------------------------------------------------

Eigen::Matrix3d axis_to_z(const Eigen::Vector3d& axis) {
  // rotation R with R*axis = z
  const Eigen::Vector3d z(0, 0, 1);
  const Eigen::Vector3d a = axis.normalized();
  const double c = a.dot(z);
  if (c > 1.0 - 1e-14) return Eigen::Matrix3d::Identity();
  if (c < -1.0 + 1e-14) {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    R(0, 0) = -1.0;
    R(2, 2) = -1.0;
    return R;
  }
  const Eigen::Vector3d v = a.cross(z);
  Eigen::Matrix3d K;
  K << 0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0;
  return Eigen::Matrix3d::Identity() + K + K * K / (1.0 + c);
}

double chart_pole_clearance(const SphereChart& chart, const Manifold& M,
                            const GeodesicSegment& seg) {
  double worst = kPi;
  for (int i = 0; i <= 16; ++i) {
    const Eigen::Vector3d x = seg.eval(M, i / 16.0);
    const double th = chart.colatitude(x);
    worst = std::min(worst, std::min(th, kPi - th));
  }
  return worst;
}

SphereChart pick_chart(const Manifold& M, const GeodesicSegment& seg) {
  std::vector<Eigen::Vector3d> axes = {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
  for (const auto& ax : axes) {
    SphereChart c;
    c.R = axis_to_z(ax);
    if (chart_pole_clearance(c, M, seg) > kPoleCap) return c;
  }
  // last resort: the chart whose equator carries the segment
  const Eigen::Vector3d n = Eigen::Vector3d(seg.p).cross(Eigen::Vector3d(seg.q));
  if (n.norm() < 1e-12) {
    // antipodal or degenerate; any axis orthogonal to p works
    Eigen::Vector3d p(seg.p);
    Eigen::Vector3d a = (std::abs(p[2]) < 0.9) ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(1, 0, 0);
    SphereChart c;
    c.R = axis_to_z(p.cross(a).normalized());
    return c;
  }
  SphereChart c;
  c.R = axis_to_z(n.normalized());
  return c;
}

Eigen::MatrixXd sphere_segment_transport(const MetricConnection& C, const GeodesicSegment& seg,
                                         const Eigen::MatrixXd& Q, int steps) {
  const Manifold& M = C.manifold;
  const Eigen::Vector3d p(seg.p), q(seg.q);
  const SphereChart canon_p = canonical_chart(p);
  const SphereChart canon_q = canonical_chart(q);
  if (seg.length < 1e-15) {
    return rot2(frame_change_angle(canon_p, canon_q, p)) * Q;
  }
  const SphereChart work = pick_chart(M, seg);
  const Eigen::Matrix2d J = symplectic_j();
  const double d = seg.length;
  const Eigen::Vector3d e = Eigen::Vector3d(seg.velocity) / d;
  auto G = [&](double t) -> Eigen::MatrixXd {
    const Eigen::Vector3d x = std::cos(t * d) * p + std::sin(t * d) * e;
    const Eigen::Vector3d xdot = d * (-std::sin(t * d) * p + std::cos(t * d) * e);
    const Eigen::Vector3d y = work.R * x;
    const Eigen::Vector3d ydot = work.R * xdot;
    const double r2 = y[0] * y[0] + y[1] * y[1];
    const double phidot = (y[0] * ydot[1] - y[1] * ydot[0]) / r2;
    return Eigen::MatrixXd(y[2] * phidot * J);  // Gamma_phi<gdot> = cos(theta) phidot J
  };
  Eigen::MatrixXd T = rk4_transport(G, 2, steps, Eigen::MatrixXd::Identity(2, 2));
  T = rot2(frame_change_angle(work, canon_q, q)) * T *
      rot2(frame_change_angle(canon_p, work, p));
  return polar_project(T * Q);
}

// scalar coefficient c(t) with Gamma<gdot(t)> = c(t) J along a lifted flat
// segment, for U(1) connections
double u1_segment_integral(const MetricConnection& C, const GeodesicSegment& seg) {
  const Manifold& M = C.manifold;
  const Eigen::VectorXd u0 = M.basis_inv * seg.p;
  const Eigen::VectorXd du = M.basis_inv * seg.velocity;  // lifted lattice increment
  if (C.type == ConnectionType::Trivial) return 0.0;
  if (C.type == ConnectionType::FlatU1) {
    double total = 0.0;
    for (int j = 0; j < M.dim; ++j) total += -kTwoPi * C.u1.periods[j] * du[j];
    // exact oscillatory part telescopes through the lift
    total += C.u1.osc_amplitude *
             (std::sin(kTwoPi * (u0[0] + du[0])) - std::sin(kTwoPi * u0[0]));
    return total;
  }
  if (C.type == ConnectionType::SinForm) {
    const double a = C.sin_amplitude;
    if (std::abs(du[0]) < 1e-14) return a * std::sin(kTwoPi * u0[0]) * du[1];
    return a * du[1] *
           (std::cos(kTwoPi * u0[0]) - std::cos(kTwoPi * (u0[0] + du[0]))) /
           (kTwoPi * du[0]);
  }
  // generic 16-point Gauss-Legendre fallback
  static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                 0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
  static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                 0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
  double total = 0.0;
  for (int k = 0; k < 8; ++k) {
    for (const double t : {0.5 - 0.5 * gl_x[k], 0.5 + 0.5 * gl_x[k]}) {
      const Point x = reduce_point(M, seg.p + t * seg.velocity);
      const auto gam = evaluate_gamma(C, x);
      double c = 0.0;
      for (int i = 0; i < M.dim; ++i) c += gam[i](1, 0) * seg.velocity[i];
      total += 0.5 * gl_w[k] * c;
    }
  }
  return total;
}

// numeric divergence sum_i d_i Gamma_i for the derived Ito drift
Eigen::MatrixXd gamma_divergence(const MetricConnection& C, const Point& x) {
  const Manifold& M = C.manifold;
  const double h = 1e-6;
  Eigen::MatrixXd div = Eigen::MatrixXd::Zero(C.rank, C.rank);
  for (int i = 0; i < M.dim; ++i) {
    Point xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const auto gp = evaluate_gamma(C, reduce_point(M, xp));
    const auto gm = evaluate_gamma(C, reduce_point(M, xm));
    div += (gp[i] - gm[i]) / (2.0 * h);
  }
  return div;
}

}  // namespace

Eigen::MatrixXd polar_project(const Eigen::MatrixXd& Q) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double rotation_angle(const Eigen::MatrixXd& Q) {
  double a = std::atan2(Q(1, 0), Q(0, 0)) / kTwoPi;
  a -= std::floor(a);
  if (a >= 1.0) a = 0.0;
  return a;
}

double SphereChart::colatitude(const Eigen::Vector3d& x) const {
  return std::acos(std::clamp((R * x)[2], -1.0, 1.0));
}

void SphereChart::frame(const Eigen::Vector3d& x, Eigen::Vector3d& e_th,
                        Eigen::Vector3d& e_ph) const {
  const Eigen::Vector3d y = R * x;
  const double st = std::sqrt(std::max(0.0, 1.0 - y[2] * y[2]));
  if (st < 1e-12) throw ChartUndefined("sphere chart frame undefined at pole");
  const double ct = y[2];
  const double cp = y[0] / st, sp = y[1] / st;
  e_th = R.transpose() * Eigen::Vector3d(ct * cp, ct * sp, -st);
  e_ph = R.transpose() * Eigen::Vector3d(-sp, cp, 0.0);
}

SphereChart canonical_chart(const Eigen::Vector3d& x) {
  SphereChart c;
  if (std::abs(x[2]) > std::cos(kPoleCap)) {
    c.R = axis_to_z(Eigen::Vector3d(1, 0, 0));
  }
  return c;
}

double frame_change_angle(const SphereChart& a, const SphereChart& b, const Eigen::Vector3d& x) {
  Eigen::Vector3d ath, aph, bth, bph;
  a.frame(x, ath, aph);
  b.frame(x, bth, bph);
  return std::atan2(bph.dot(ath), bth.dot(ath));
}

int default_steps(const GeodesicSegment& seg) {
  return std::max(8, static_cast<int>(std::ceil(seg.length / 0.01)));
}

Frame transport_segment(const MetricConnection& C, const GeodesicSegment& seg, const Frame& Q,
                        int steps) {
  if (steps < 1) throw ConfigError("transport_segment: steps must be >= 1");
  if (C.type == ConnectionType::LeviCivitaSphere)
    return sphere_segment_transport(C, seg, Q, steps);
  const Manifold& M = C.manifold;
  if (C.type == ConnectionType::Trivial) return Q;
  auto G = [&](double t) -> Eigen::MatrixXd {
    const Point x = reduce_point(M, seg.p + t * seg.velocity);
    const auto gam = evaluate_gamma(C, x);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(C.rank, C.rank);
    for (int i = 0; i < M.dim; ++i) g += gam[i] * seg.velocity[i];
    return g;
  };
  return polar_project(rk4_transport(G, C.rank, steps, Q));
}

HolonomyElement holonomy(const MetricConnection& C, const PiecewiseGeodesicLoop& loop,
                         int steps_per_segment) {
  Frame Q = Eigen::MatrixXd::Identity(C.rank, C.rank);
  for (const auto& seg : loop.segments) {
    const int steps = steps_per_segment > 0 ? steps_per_segment : default_steps(seg);
    Q = transport_segment(C, seg, Q, steps);
  }
  HolonomyElement h;
  h.Q = Q;
  if (C.rank == 2 && Q.determinant() > 0.0 &&
      (Q * symplectic_j() - symplectic_j() * Q).norm() < 1e-6) {
    h.has_u1 = true;
    h.angle = rotation_angle(Q);
  }
  return h;
}

HolonomyElement holonomy_u1_exact(const MetricConnection& C, const PiecewiseGeodesicLoop& loop) {
  if (!C.is_u1() || !C.manifold.flat())
    throw ConfigError("holonomy_u1_exact needs a U(1) connection on a flat member");
  double total = 0.0;
  for (const auto& seg : loop.segments) total += u1_segment_integral(C, seg);
  HolonomyElement h;
  h.has_u1 = true;
  const double a = -total;  // //_1 = exp(-int Gamma) = exp(a J)
  h.Q = rot2(a);
  h.angle = a / kTwoPi - std::floor(a / kTwoPi);
  if (h.angle >= 1.0) h.angle = 0.0;
  return h;
}

double stokes_check(const MetricConnection& C, const PiecewiseGeodesicLoop& loop,
                    int steps_per_segment) {
  const Manifold& M = C.manifold;
  if (!C.is_u1() || !M.flat())
    throw ConfigError("stokes_check needs a U(1) connection on a flat member");
  const WindingClass nu = winding_class(M, loop);
  if (nu.size() > 0 && nu.cwiseAbs().sum() != 0)
    throw NotContractible("stokes_check: loop has nonzero winding");
  (void)steps_per_segment;
  const HolonomyElement h = holonomy_u1_exact(C, loop);

  // lift the loop and cone it to the base point; integrate F over the fan
  const int n = M.dim;
  std::vector<Point> lifted;
  lifted.push_back(loop.base);
  for (std::size_t i = 0; i < loop.segments.size(); ++i)
    lifted.push_back(lifted.back() + loop.segments[i].velocity);

  static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                 0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
  static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                 0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
  std::vector<double> nodes, wts;
  for (int k = 0; k < 8; ++k) {
    nodes.push_back(0.5 - 0.5 * gl_x[k]);
    wts.push_back(0.5 * gl_w[k]);
    nodes.push_back(0.5 + 0.5 * gl_x[k]);
    wts.push_back(0.5 * gl_w[k]);
  }

  double omega = 0.0;  // J-coefficient of the surface integral
  const Point& x0 = lifted.front();
  for (std::size_t i = 0; i + 1 < lifted.size(); ++i) {
    const Point ta = lifted[i] - x0;
    const Point tb = lifted[i + 1] - x0;
    if (ta.norm() < 1e-15 && tb.norm() < 1e-15) continue;
    // triangle (x0, lifted[i], lifted[i+1]); collapsed-square quadrature
    double tri = 0.0;
    for (std::size_t ia = 0; ia < nodes.size(); ++ia) {
      const double sA = nodes[ia];
      for (std::size_t ib = 0; ib < nodes.size(); ++ib) {
        const double b = nodes[ib] * (1.0 - sA);
        const Point P = x0 + sA * ta + b * tb;
        const auto F = curvature(C, reduce_point(M, P));
        double val = 0.0;
        int idx = 0;
        for (int p = 0; p < n; ++p)
          for (int q = p + 1; q < n; ++q, ++idx)
            val += F[idx](1, 0) * (ta[p] * tb[q] - ta[q] * tb[p]);
        tri += wts[ia] * wts[ib] * (1.0 - sA) * val;
      }
    }
    omega += tri;
  }
  const Eigen::Matrix2d rhs = rot2(-omega);
  return (h.Q - rhs).norm();
}

HolonomyElement transport_ito_euler(const MetricConnection& C, const LoopVertices& v,
                                    int substeps, RngStream& rng, ItoCorrection correction) {
  const Manifold& M = C.manifold;
  if (!M.flat()) throw ConfigError("transport_ito_euler: flat members only");
  if (substeps < 1) throw ConfigError("transport_ito_euler: substeps must be >= 1");
  std::vector<Point> verts;
  verts.push_back(v.base);
  for (const auto& p : v.vertices) verts.push_back(p);
  verts.push_back(v.base);

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(C.rank, C.rank);
  const double dt = 1.0 / (static_cast<double>(v.m) * substeps);
  Point lift = v.base;
  for (int i = 0; i < v.m; ++i) {
    const Point delta = nearest_increment(M, verts[i], verts[i + 1]);
    // Brownian sub-bridge from 0 to delta across the interval
    Point z = Point::Zero(M.dim);
    for (int j = 0; j < substeps; ++j) {
      const int remaining = substeps - j;
      const double var = 2.0 * dt * (remaining - 1.0) / remaining;
      const double sd = std::sqrt(std::max(0.0, var));
      Point znext = z + (delta - z) / remaining;
      for (int d = 0; d < M.dim; ++d) znext[d] += sd * rng.normal();
      const Point dx = znext - z;
      const Point xcur = reduce_point(M, lift + z);
      const auto gam = evaluate_gamma(C, xcur);
      Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(C.rank, C.rank);
      if (correction == ItoCorrection::AsPrinted) {
        for (int d = 0; d < M.dim; ++d) drift -= 2.0 * gam[d] * gam[d];
      } else {
        for (int d = 0; d < M.dim; ++d) drift += gam[d] * gam[d];
        drift -= gamma_divergence(C, xcur);
      }
      Eigen::MatrixXd dA = drift * A * dt;
      for (int d = 0; d < M.dim; ++d) dA -= gam[d] * A * dx[d];
      A += dA;
      z = znext;
    }
    lift += delta;
  }
  HolonomyElement h;
  h.Q = polar_project(A);
  if (C.rank == 2 && h.Q.determinant() > 0.0) {
    h.has_u1 = C.is_u1();
    h.angle = rotation_angle(h.Q);
  }
  return h;
}

}  // namespace holomc
