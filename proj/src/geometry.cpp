#include "holomc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace holomc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

// Enumerate integer vectors z with |z|_inf == shell, n = z.size().
void enumerate_shell(int n, int shell, std::vector<Eigen::VectorXi>& out) {
  Eigen::VectorXi z = Eigen::VectorXi::Zero(n);
  std::vector<int> idx(n, -shell);
  while (true) {
    int maxabs = 0;
    for (int i = 0; i < n; ++i) maxabs = std::max(maxabs, std::abs(idx[i]));
    if (maxabs == shell) {
      for (int i = 0; i < n; ++i) z[i] = idx[i];
      out.push_back(z);
    }
    int i = 0;
    for (; i < n; ++i) {
      if (idx[i] < shell) {
        ++idx[i];
        break;
      }
      idx[i] = -shell;
    }
    if (i == n) break;
  }
}

double sphere_distance(const Point& p, const Point& q) {
  const double c = std::clamp((p - q).norm() * 0.5, 0.0, 1.0);
  return 2.0 * std::asin(c);
}

// Legendre P_l(x) spectral sum for the unit 2-sphere heat kernel.
HeatKernelResult sphere_heat_kernel(double s, double cosd, double tol) {
  static bool warned = false;
  if (s < 1e-3 && !warned) {
    std::cerr << "holomc: sphere spectral heat kernel evaluated at s=" << s
              << " (< 1e-3); long sums, accuracy degrades for much smaller s\n";
    warned = true;
  }
  double p_prev = 1.0;        // P_0
  double p_curr = cosd;       // P_1
  double sum = 1.0;           // l = 0 term
  double tail = 0.0;
  const int lmax = 100000;
  int l = 1;
  for (; l <= lmax; ++l) {
    sum += (2.0 * l + 1.0) * std::exp(-static_cast<double>(l) * (l + 1.0) * s) * p_curr;
    // bound the tail by the geometric-dominated term-magnitude series
    const double b = (2.0 * l + 3.0) * std::exp(-(l + 1.0) * (l + 2.0) * s);
    const double ratio = std::exp(-(2.0 * l + 4.0) * s) * (2.0 * l + 5.0) / (2.0 * l + 3.0);
    if (ratio < 1.0) {
      tail = b / (1.0 - ratio);
      if (tail < tol * 4.0 * kPi) break;
    }
    const double p_next = ((2.0 * l + 1.0) * cosd * p_curr - l * p_prev) / (l + 1.0);
    p_prev = p_curr;
    p_curr = p_next;
  }
  return {sum / (4.0 * kPi), tail / (4.0 * kPi)};
}

}  // namespace

Manifold Manifold::circle(double circumference) {
  if (!(circumference > 0.0)) throw ConfigError("circle circumference must be > 0");
  Eigen::MatrixXd B(1, 1);
  B(0, 0) = circumference;
  Manifold M = flat_torus(B);
  M.kind = ManifoldKind::Circle;
  return M;
}

Manifold Manifold::flat_torus(const Eigen::MatrixXd& lattice_basis) {
  if (lattice_basis.rows() != lattice_basis.cols() || lattice_basis.rows() < 1)
    throw ConfigError("lattice basis must be a square matrix");
  Manifold M;
  M.kind = ManifoldKind::FlatTorus;
  M.dim = static_cast<int>(lattice_basis.rows());
  M.basis = lattice_basis;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(lattice_basis);
  M.min_singular = svd.singularValues().minCoeff();
  if (M.min_singular < 1e-12) throw ConfigError("lattice basis is singular");
  M.basis_inv = lattice_basis.inverse();
  return M;
}

Manifold Manifold::sphere2() {
  Manifold M;
  M.kind = ManifoldKind::Sphere2;
  M.dim = 2;
  return M;
}

double Manifold::volume() const {
  if (flat()) return std::abs(basis.determinant());
  return 4.0 * kPi;
}

Point reduce_point(const Manifold& M, const Point& x) {
  if (M.flat()) {
    Eigen::VectorXd u = M.basis_inv * x;
    for (int i = 0; i < u.size(); ++i) u[i] -= std::floor(u[i]);
    return M.basis * u;
  }
  const double n = x.norm();
  if (n < 1e-12) throw ConfigError("cannot project zero vector to the sphere");
  return x / n;
}

bool valid_point(const Manifold& M, const Point& x, double tol) {
  if (x.size() != M.ambient_dim()) return false;
  if (M.flat()) {
    Eigen::VectorXd u = M.basis_inv * x;
    for (int i = 0; i < u.size(); ++i)
      if (u[i] < -tol || u[i] >= 1.0 + tol) return false;
    return true;
  }
  return std::abs(x.norm() - 1.0) < 1e-12 + tol;
}

Point nearest_increment(const Manifold& M, const Point& p, const Point& q) {
  if (!M.flat()) throw ConfigError("nearest_increment is defined on flat members only");
  const int n = M.dim;
  Point best = q - p;
  double best_norm = best.norm();
  std::vector<Eigen::VectorXi> shell;
  enumerate_shell(n, 1, shell);
  // shifts with |z|_inf <= 1 suffice for fundamental-domain representatives
  Point d0 = q - p;
  for (const auto& z : shell) {
    Point cand = d0 + M.basis * z.cast<double>();
    if (cand.norm() < best_norm) {
      best_norm = cand.norm();
      best = cand;
    }
  }
  return best;
}

double distance(const Manifold& M, const Point& p, const Point& q) {
  if (M.flat()) return nearest_increment(M, p, q).norm();
  return sphere_distance(p, q);
}

double injectivity_radius(const Manifold& M) {
  if (!M.flat()) return kPi;
  // shortest nonzero lattice vector over a modest enumeration window
  double best = std::numeric_limits<double>::infinity();
  for (int shell = 1; shell <= 4; ++shell) {
    std::vector<Eigen::VectorXi> zs;
    enumerate_shell(M.dim, shell, zs);
    for (const auto& z : zs) best = std::min(best, (M.basis * z.cast<double>()).norm());
    if (best <= M.min_singular * shell) break;  // later shells cannot beat it
  }
  return best / 2.0;
}

double rho(const Manifold& M) { return 0.5 * injectivity_radius(M); }

Point interpolate(const Manifold& M, const Point& p, const Point& q, double t) {
  const double d = distance(M, p, q);
  const double r = rho(M);
  if (d > r * (1.0 + 1e-12))
    throw DistanceTooLarge("interpolate: d=" + std::to_string(d) + " > rho=" + std::to_string(r));
  if (M.flat()) return reduce_point(M, p + t * nearest_increment(M, p, q));
  // sphere slerp
  if (d < 1e-15) return p;
  const double s = std::sin(d);
  Point y = (std::sin((1.0 - t) * d) * p + std::sin(t * d) * q) / s;
  return y / y.norm();
}

GeodesicSegment geodesic(const Manifold& M, const Point& p, const Point& q) {
  const double d = distance(M, p, q);
  const double r = rho(M);
  if (d > r * (1.0 + 1e-12))
    throw DistanceTooLarge("geodesic: d=" + std::to_string(d) + " > rho=" + std::to_string(r));
  GeodesicSegment seg;
  seg.p = p;
  seg.q = q;
  seg.length = d;
  if (M.flat()) {
    seg.velocity = nearest_increment(M, p, q);
  } else if (d < 1e-15) {
    seg.velocity = Eigen::Vector3d::Zero();
  } else {
    Eigen::Vector3d u = (Eigen::Vector3d(q) - Eigen::Vector3d(p) * p.dot(q));
    seg.velocity = d * u / u.norm();  // tangent at p, |v| = length
  }
  return seg;
}

Point GeodesicSegment::eval(const Manifold& M, double t) const {
  if (M.flat()) return reduce_point(M, p + t * velocity);
  const double d = length;
  if (d < 1e-15) return p;
  const Eigen::Vector3d e = Eigen::Vector3d(velocity) / d;
  return std::cos(t * d) * Eigen::Vector3d(p) + std::sin(t * d) * e;
}

HeatKernelResult heat_kernel_certified(const Manifold& M, double s, const Point& p,
                                       const Point& q, double tol) {
  if (!(s > 0.0)) throw NonPositiveTime("heat_kernel: s must be > 0");
  if (!M.flat()) {
    return sphere_heat_kernel(s, std::cos(sphere_distance(p, q)), tol);
  }
  const int n = M.dim;
  const double pref = std::pow(4.0 * kPi * s, -0.5 * n);
  const Point d0 = nearest_increment(M, p, q);
  const double d0n = d0.norm();
  double sum = std::exp(-d0.squaredNorm() / (4.0 * s));
  double tail = 0.0;
  const double smin = M.min_singular;
  for (int k = 1; k < 10000; ++k) {
    std::vector<Eigen::VectorXi> zs;
    enumerate_shell(n, k, zs);
    for (const auto& z : zs) {
      sum += std::exp(-(d0 + M.basis * z.cast<double>()).squaredNorm() / (4.0 * s));
    }
    // Gaussian tail bound: shells j > k have |d0 + B z| >= smin*j - |d0|
    tail = 0.0;
    for (int j = k + 1; j < k + 600; ++j) {
      const double cnt = std::pow(2.0 * j + 1.0, n) - std::pow(2.0 * j - 1.0, n);
      const double r = std::max(0.0, smin * j - d0n);
      const double term = cnt * std::exp(-r * r / (4.0 * s));
      tail += term;
      if (r > 0.0 && term < tol * 1e-6) break;
    }
    if (tail * pref < tol) break;
  }
  return {pref * sum, pref * tail};
}

double heat_kernel(const Manifold& M, double s, const Point& p, const Point& q, double tol) {
  return heat_kernel_certified(M, s, p, q, tol).value;
}

double DiagonalKernelCache::value(const Point& x) {
  std::vector<double> key(x.data(), x.data() + x.size());
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const double v = heat_kernel(manifold_, 1.0, x, x);
  std::lock_guard<std::mutex> lk(mu_);
  cache_.emplace(std::move(key), v);
  return v;
}

double heat_kernel_diagonal_total(const Manifold& M, const Point& x) {
  return heat_kernel(M, 1.0, x, x);
}

}  // namespace holomc
