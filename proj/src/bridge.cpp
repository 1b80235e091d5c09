#include "holomc/bridge.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace holomc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

bool power_of_two(int m) { return m >= 2 && (m & (m - 1)) == 0; }

void require_power_of_two(int m) {
  if (!power_of_two(m)) throw ConfigError("partition size m must be a power of two >= 2");
}

void enumerate_shell(int n, int shell, std::vector<Eigen::VectorXi>& out) {
  std::vector<int> idx(n, -shell);
  while (true) {
    int maxabs = 0;
    for (int i = 0; i < n; ++i) maxabs = std::max(maxabs, std::abs(idx[i]));
    if (maxabs == shell) {
      Eigen::VectorXi z(n);
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

// --- sphere proposal machinery ---------------------------------------------

// density (w.r.t. sphere area) of exp_x(sqrt(2s) N(0, I_2)) at geodesic
// distance r, summing tangent preimages of radius |r + 2 pi j|.
double sphere_proposal_density(double s, double r) {
  const double sinr = std::max(std::sin(r), 1e-12);
  double q = 0.0;
  for (int j = 0; j < 4; ++j) {
    for (const double u : {r + 2.0 * kPi * j, 2.0 * kPi - r + 2.0 * kPi * j}) {
      if (u <= 0.0) continue;
      q += std::exp(-u * u / (4.0 * s)) / (4.0 * kPi * s) * u / sinr;
    }
  }
  return q;
}

// dominating constant c(s) >= p_s(r) / q_s(r), cached per step time.
double sphere_dominating_constant(const Manifold& M, double s) {
  static std::map<double, double> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
  }
  Point np(3), y(3);
  np << 0.0, 0.0, 1.0;
  double c = 1.0;
  const int grid = 2000;
  // spectral cancellation noise floor: far in the tail the computed kernel is
  // round-off around zero, so ratios against the (much smaller) proposal
  // density there are meaningless
  const double noise = 1e-12 * heat_kernel(M, s, np, np);
  for (int i = 1; i < grid; ++i) {
    const double r = kPi * i / grid;
    y << std::sin(r), 0.0, std::cos(r);
    const double p = heat_kernel(M, s, np, y, 1e-13);
    const double q = sphere_proposal_density(s, r);
    if (p > noise && q > 0.0) c = std::max(c, p / q);
  }
  c *= 1.05;
  std::lock_guard<std::mutex> lk(mu);
  cache.emplace(s, c);
  return c;
}

void tangent_basis(const Eigen::Vector3d& x, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
  Eigen::Vector3d a = (std::abs(x[2]) < 0.9) ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(1, 0, 0);
  e1 = a.cross(x).normalized();
  e2 = x.cross(e1);
}

Point sample_sphere_heat_step(const Manifold& M, const Point& x, double s, RngStream& rng) {
  const double c = sphere_dominating_constant(M, s);
  Eigen::Vector3d e1, e2;
  tangent_basis(x, e1, e2);
  const double sigma = std::sqrt(2.0 * s);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Eigen::Vector3d v = sigma * (rng.normal() * e1 + rng.normal() * e2);
    const double vn = v.norm();
    Eigen::Vector3d y = (vn < 1e-15)
                            ? Eigen::Vector3d(x)
                            : Eigen::Vector3d(std::cos(vn) * Eigen::Vector3d(x) +
                                              std::sin(vn) * v / vn);
    y.normalize();
    const double r = distance(M, x, y);
    const double p = heat_kernel(M, s, x, y, 1e-13);
    const double q = sphere_proposal_density(s, r);
    if (rng.uniform() * c * q <= p) return y;
  }
  throw ProposalFailure("sphere heat-kernel step: retry cap exceeded");
}

}  // namespace

double PiecewiseGeodesicLoop::total_length() const {
  double len = 0.0;
  for (const auto& seg : segments) len += seg.length;
  return len;
}

WindingTable winding_table(const Manifold& M, double tail_tol) {
  if (!M.flat()) throw ConfigError("winding_table: flat members only");
  const int n = M.dim;
  WindingTable T;
  double total = 1.0;  // nu = 0
  T.atoms.push_back(Eigen::VectorXi::Zero(n));
  T.weights.push_back(1.0);
  double tail_est = 0.0;
  for (int k = 1; k < 1000; ++k) {
    std::vector<Eigen::VectorXi> zs;
    enumerate_shell(n, k, zs);
    double shell = 0.0;
    for (const auto& z : zs) {
      const double w = std::exp(-(M.basis * z.cast<double>()).squaredNorm() / 4.0);
      T.atoms.push_back(z);
      T.weights.push_back(w);
      shell += w;
    }
    total += shell;
    // remaining shells bounded by a rapidly decaying geometric envelope
    const double r_next = M.min_singular * (k + 1);
    const double cnt = std::pow(2.0 * k + 3.0, n);
    tail_est = 2.0 * cnt * std::exp(-r_next * r_next / 4.0);
    if (tail_est < tail_tol * total) break;
  }
  for (auto& w : T.weights) w /= total;
  T.omitted_mass = tail_est / total;
  return T;
}

LoopVertices sample_bridge_torus(const Manifold& M, const Point& x, int m, RngStream& rng) {
  require_power_of_two(m);
  if (!M.flat()) throw ConfigError("sample_bridge_torus: flat members only");
  const WindingTable T = winding_table(M);
  // draw the homotopy class from the component masses
  double u = rng.uniform();
  std::size_t pick = T.atoms.size() - 1;
  for (std::size_t i = 0; i < T.weights.size(); ++i) {
    u -= T.weights[i];
    if (u < 0.0) {
      pick = i;
      break;
    }
  }
  const Eigen::VectorXi nu = T.atoms[pick];
  const Point target = M.basis * nu.cast<double>();
  // Euclidean Gaussian bridge 0 -> target in m steps, generator Lap
  LoopVertices v;
  v.base = x;
  v.m = m;
  v.weight = 1.0;
  v.drawn_winding = nu;
  v.vertices.reserve(m - 1);
  Point y = Point::Zero(M.dim);
  for (int i = 0; i < m - 1; ++i) {
    const int remaining = m - i;  // steps left to reach the target
    const double var = (2.0 / m) * (remaining - 1.0) / remaining;
    const double sd = std::sqrt(var);
    const Point mean = y + (target - y) / remaining;
    for (int d = 0; d < M.dim; ++d) y[d] = mean[d] + sd * rng.normal();
    v.vertices.push_back(reduce_point(M, x + y));
  }
  return v;
}

LoopVertices sample_bridge_is(const Manifold& M, const Point& x, int m, RngStream& rng) {
  require_power_of_two(m);
  const double s = 1.0 / m;
  LoopVertices v;
  v.base = x;
  v.m = m;
  v.vertices.reserve(m - 1);
  Point cur = x;
  if (M.flat()) {
    const double sd = std::sqrt(2.0 * s);
    for (int i = 0; i < m - 1; ++i) {
      Point step(M.dim);
      for (int d = 0; d < M.dim; ++d) step[d] = sd * rng.normal();
      cur = reduce_point(M, cur + step);
      v.vertices.push_back(cur);
    }
  } else {
    for (int i = 0; i < m - 1; ++i) {
      cur = sample_sphere_heat_step(M, cur, s, rng);
      v.vertices.push_back(cur);
    }
  }
  v.weight = heat_kernel(M, s, cur, x) / heat_kernel(M, 1.0, x, x);
  return v;
}

bool admissible(const Manifold& M, const LoopVertices& v, double rho_value) {
  Point prev = v.base;
  for (const auto& p : v.vertices) {
    if (!(distance(M, prev, p) < rho_value)) return false;
    prev = p;
  }
  return distance(M, prev, v.base) < rho_value;
}

PiecewiseGeodesicLoop build_loop(const Manifold& M, const LoopVertices& v) {
  PiecewiseGeodesicLoop loop;
  loop.base = v.base;
  loop.m = v.m;
  loop.vertices.reserve(v.m + 1);
  loop.vertices.push_back(v.base);
  for (const auto& p : v.vertices) loop.vertices.push_back(p);
  loop.vertices.push_back(v.base);
  loop.segments.reserve(v.m);
  for (int i = 0; i < v.m; ++i)
    loop.segments.push_back(geodesic(M, loop.vertices[i], loop.vertices[i + 1]));
  return loop;
}

LoopVertices refine_midpoints(const Manifold& M, const LoopVertices& v) {
  LoopVertices out;
  out.base = v.base;
  out.m = 2 * v.m;
  out.weight = v.weight;
  out.drawn_winding = v.drawn_winding;
  std::vector<Point> verts;
  verts.push_back(v.base);
  for (const auto& p : v.vertices) verts.push_back(p);
  verts.push_back(v.base);
  for (std::size_t i = 0; i + 1 < verts.size(); ++i) {
    out.vertices.push_back(interpolate(M, verts[i], verts[i + 1], 0.5));
    if (i + 2 < verts.size()) out.vertices.push_back(verts[i + 1]);
  }
  return out;
}

WindingClass winding_class(const Manifold& M, const PiecewiseGeodesicLoop& loop) {
  if (!M.flat()) return WindingClass();  // trivial pi_1 marker
  Point total = Point::Zero(M.dim);
  for (const auto& seg : loop.segments) total += seg.velocity;
  const Eigen::VectorXd nu_real = M.basis_inv * total;
  WindingClass nu(M.dim);
  for (int i = 0; i < M.dim; ++i) {
    const double r = std::round(nu_real[i]);
    if (std::abs(nu_real[i] - r) >= 1e-9)
      throw LiftDefect("winding lift defect " + std::to_string(nu_real[i] - r));
    nu[i] = static_cast<int>(r);
  }
  return nu;
}

}  // namespace holomc
