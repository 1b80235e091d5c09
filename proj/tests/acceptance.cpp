// End-to-end acceptance checks. Each numbered block prints one PASS/FAIL line;
// the exit status is the number of failing blocks.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "holomc/experiments.hpp"
#include "holomc/transport.hpp"

using namespace holomc;

namespace {

constexpr double kPi = 3.14159265358979323846;

int failures = 0;

void report(int n, bool ok, const std::string& detail = "") {
  std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL");
  if (!ok && !detail.empty()) std::cout << "  (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++failures;
}

Eigen::VectorXd periods1(double t) { return (Eigen::VectorXd(1) << t).finished(); }

double frac(double x) { return x - std::floor(x); }
double arc01(double a) {
  const double f = frac(a);
  return std::min(f, 1.0 - f);
}

double theta_weight(int nu, int cutoff = 60) {
  double z = 0.0;
  for (int k = -cutoff; k <= cutoff; ++k) z += std::exp(-k * k / 4.0);
  return std::exp(-nu * nu / 4.0) / z;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// rows of a numeric csv, header skipped
std::vector<std::vector<double>> read_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

ExperimentConfig circle_cfg(double theta, int m, long long samples, std::uint64_t seed,
                            int workers) {
  ExperimentConfig cfg;
  cfg.manifold = Manifold::circle(1.0);
  cfg.connection = MetricConnection::flat_u1(cfg.manifold, periods1(theta));
  cfg.base = Point::Zero(1);
  cfg.m_schedule = {m};
  cfg.samples = samples;
  cfg.seed = seed;
  cfg.has_seed = true;
  cfg.workers = workers;
  return cfg;
}

// exact transport along one sphere geodesic: in the chart whose equator
// carries the segment only the frame changes contribute
Eigen::Matrix2d exact_sphere_segment(const GeodesicSegment& seg) {
  const Eigen::Vector3d p(seg.p), q(seg.q);
  const Eigen::Vector3d n = p.cross(q).normalized();
  SphereChart work;
  work.R.row(0) = p.transpose();
  work.R.row(1) = n.cross(p).transpose();
  work.R.row(2) = n.transpose();
  const double a_in = frame_change_angle(canonical_chart(p), work, p);
  const double a_out = frame_change_angle(work, canonical_chart(q), q);
  auto rot = [](double a) {
    Eigen::Matrix2d R;
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return R;
  };
  return rot(a_out) * rot(a_in);
}

LoopVertices random_torus_loop(const Manifold& M, int m, std::uint64_t seed, std::uint64_t idx) {
  RngStream rng(seed, idx);
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    LoopVertices v = sample_bridge_torus(M, reduce_point(M, Point::Zero(M.dim)), m, rng);
    if (admissible(M, v, rho(M))) return v;
  }
  throw ProposalFailure("no admissible loop");
}

}  // namespace

// 1. winding frequencies from the exact sampler at m=64, N=1e5, single thread
void criterion1() {
  const Manifold M = Manifold::circle(1.0);
  const Point x = Point::Zero(1);
  const long long n = 100000;
  const auto t0 = std::chrono::steady_clock::now();
  std::map<int, long long> counts;
  for (long long i = 0; i < n; ++i) {
    RngStream rng(42, static_cast<std::uint64_t>(i));
    const LoopVertices v = sample_bridge_torus(M, x, 64, rng);
    counts[(*v.drawn_winding)[0]]++;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = secs < 60.0;
  std::string detail = ok ? "" : "too slow";
  for (int nu = -3; nu <= 3; ++nu) {
    const double w = theta_weight(nu);
    const double sigma = std::sqrt(w * (1.0 - w) / n);
    const double freq = counts[nu] / static_cast<double>(n);
    if (std::abs(freq - w) >= 3.0 * sigma) {
      ok = false;
      detail = "class " + std::to_string(nu) + " off";
    }
  }
  report(1, ok, detail);
}

// 2. flat U(1) pipeline measure vs the closed form, theta = 0.3
void criterion2() {
  const Manifold M = Manifold::circle(1.0);
  const FlatU1Form F{periods1(0.3), 0.0};
  const WindingEnsemble ens = sample_windings(M, Point::Zero(1), 1024, 100000, 42, "exact", 4);
  const HolonomyMeasure mu = winding_measure(ens, F);
  const HolonomyMeasure ref = analytic_flat_u1(M, F);
  bool ok = true;
  std::string detail;
  for (const auto& a : mu.atoms) {
    double best = 1.0;
    for (int nu = -60; nu <= 60; ++nu) best = std::min(best, arc01(a.h.angle - frac(0.3 * nu)));
    if (best >= 1e-9) {
      ok = false;
      detail = "stray atom";
    }
  }
  const double d = bl_distance(mu, ref);
  const double sigma = bootstrap_sigma(mu, ref, 200, 777);
  if (!(d < 3.0 * sigma)) {
    ok = false;
    detail = "W1 " + std::to_string(d) + " vs 3 sigma " + std::to_string(3.0 * sigma);
  }
  report(2, ok, detail);
}

// 3. arc-mass collapse with group densification, theta = sqrt(2)-1
void criterion3() {
  const double theta = 0.41421356237309515;
  ExperimentConfig cfg = circle_cfg(0.0, 1024, 100000, 42, 4);
  cfg.connection.reset();
  ConnectionFamily fam;
  fam.base = MetricConnection::trivial(cfg.manifold);
  fam.delta = MetricConnection::flat_u1(cfg.manifold, periods1(theta));
  fam.schedule = {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  cfg.family = fam;
  cfg.schedule = fam.schedule;
  cfg.eps = {0.1};
  const RunReport rep = run_jump_demo(cfg);
  bool ok = rep.pass;
  std::string detail = ok ? "" : "run verdict FAIL";
  // terminal mass against the independent tail bound at tau = floor(eps*64/theta)
  const auto rows = read_csv(rep.files.at("jump.csv"));
  const int tau = static_cast<int>(std::floor(0.1 * 64 / theta));
  double tail = 0.0;
  for (int nu = -200; nu <= 200; ++nu)
    if (std::abs(nu) > tau) tail += theta_weight(nu, 200);
  const auto& last = rows.back();
  if (!(last[1] <= tail)) {
    ok = false;
    detail = "terminal mass above tail bound";
  }
  report(3, ok, detail);
}

// 4. family convergence under common random numbers, with the quadrature oracle
void criterion4() {
  ExperimentConfig cfg = circle_cfg(0.0, 1024, 20000, 42, 4);
  cfg.connection.reset();
  ConnectionFamily fam;
  fam.base = MetricConnection::trivial(cfg.manifold);
  fam.delta = MetricConnection::flat_u1(cfg.manifold, periods1(0.7));
  for (int k = 0; k <= 33; ++k) fam.schedule.push_back(std::ldexp(1.0, -k));
  cfg.family = fam;
  cfg.schedule = fam.schedule;
  const RunReport rep = run_family_convergence(cfg);
  bool ok = rep.pass;
  std::string detail = ok ? "" : "run verdict FAIL";

  const WindingEnsemble ens =
      sample_windings(cfg.manifold, cfg.base, 1024, cfg.samples, cfg.seed, "exact", cfg.workers);
  const std::vector<double> mass = class_masses(ens);
  const auto rows = read_csv(rep.files.at("family.csv"));
  for (const auto& row : rows) {
    double expect = 0.0;
    for (std::size_t c = 0; c < mass.size(); ++c)
      expect += mass[c] * 2.0 * kPi * arc01(row[0] * 0.7 * ens.classes[c][0]);
    if (std::abs(row[1] - expect) >= 1e-12) {
      ok = false;
      detail = "distance deviates from the quadrature oracle";
    }
  }
  report(4, ok, detail);
}

// 5. Stokes residuals over random contractible loops
void criterion5() {
  ExperimentConfig cfg;
  cfg.manifold = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  cfg.base = Point::Zero(2);
  cfg.m_schedule = {16};
  cfg.loops = 100;
  cfg.seed = 42;
  cfg.has_seed = true;
  cfg.connection = MetricConnection::sin_form(cfg.manifold, 1.0);
  const RunReport sin_rep = run_stokes_suite(cfg);
  cfg.connection =
      MetricConnection::flat_u1(cfg.manifold, (Eigen::VectorXd(2) << 0.3, 0.6).finished(), 0.5);
  const RunReport flat_rep = run_stokes_suite(cfg);
  report(5, sin_rep.pass && flat_rep.pass,
         sin_rep.pass ? "flat residual above 1e-12" : "sin residual above 1e-6");
}

// 6. sphere octant holonomy = pi/2 and fourth-order integrator convergence
void criterion6() {
  const Manifold M = Manifold::sphere2();
  const MetricConnection C = MetricConnection::levi_civita_sphere();
  auto pt3 = [](double x, double y, double z) {
    return Point((Eigen::VectorXd(3) << x, y, z).finished().normalized());
  };
  const Point a = pt3(1, 0, 0), b = pt3(0, 1, 0), c = pt3(0, 0, 1);
  LoopVertices v;
  v.base = a;
  v.m = 6;
  v.vertices = {interpolate(M, a, b, 0.5), b, interpolate(M, b, c, 0.5), c,
                interpolate(M, c, a, 0.5)};
  const HolonomyElement h = holonomy(C, build_loop(M, v));
  const double arc = 2.0 * kPi * std::min(h.angle, 1.0 - h.angle);
  bool ok = std::abs(arc - kPi / 2.0) < 1e-6;
  std::string detail = ok ? "" : "octant angle off";

  const GeodesicSegment seg = geodesic(M, pt3(1, 0.3, 0.5), pt3(0.2, 1.0, 0.4));
  const Eigen::Matrix2d exact = exact_sphere_segment(seg);
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  const double e1 = (transport_segment(C, seg, I2, 6) - exact).norm();
  const double e2 = (transport_segment(C, seg, I2, 12) - exact).norm();
  if (!(e1 / e2 > 12.0 && e1 / e2 < 20.0)) {
    ok = false;
    detail = "step-halving ratio " + std::to_string(e1 / e2);
  }
  report(6, ok, detail);
}

// 7. orthogonality and reversal-inverse invariants over 1e3 random loops
void criterion7() {
  const Manifold M = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  const MetricConnection S = MetricConnection::sin_form(M, 1.0);
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 1000 && ok; ++i) {
    const LoopVertices v = random_torus_loop(M, 256, 4242, static_cast<std::uint64_t>(i));
    const HolonomyElement f = holonomy(S, build_loop(M, v));
    if (f.orthogonality_defect() >= 1e-9) {
      ok = false;
      detail = "orthogonality defect";
    }
    LoopVertices r = v;
    std::reverse(r.vertices.begin(), r.vertices.end());
    const HolonomyElement b = holonomy(S, build_loop(M, r));
    if ((f.Q * b.Q - Eigen::MatrixXd::Identity(2, 2)).norm() >= 1e-9) {
      ok = false;
      detail = "reversal inverse";
    }
  }
  report(7, ok, detail);
}

// 8. rational theta = 1/4: atoms on the 4th-roots subgroup, 4 support clusters
void criterion8() {
  const Manifold M = Manifold::circle(1.0);
  const FlatU1Form F{periods1(0.25), 0.0};
  const WindingEnsemble ens = sample_windings(M, Point::Zero(1), 1024, 20000, 42, "exact", 4);
  const HolonomyMeasure mu = winding_measure(ens, F);
  bool ok = true;
  std::string detail;
  for (const auto& a : mu.atoms) {
    double best = 1.0;
    for (int j = 0; j < 4; ++j) best = std::min(best, arc01(a.h.angle - j * 0.25));
    if (best >= 1e-9) {
      ok = false;
      detail = "atom off the subgroup";
    }
  }
  const auto clusters = support_estimate(mu, 0.01);
  if (clusters.size() != 4) {
    ok = false;
    detail = "cluster count " + std::to_string(clusters.size());
  }
  report(8, ok, detail);
}

// 9. admissibility rejection below one percent on circle and square torus
void criterion9() {
  bool ok = true;
  std::string detail;
  const std::vector<Manifold> manifolds = {Manifold::circle(1.0),
                                           Manifold::flat_torus(Eigen::Matrix2d::Identity())};
  for (const Manifold& M : manifolds) {
    const WindingEnsemble ens =
        sample_windings(M, reduce_point(M, Point::Zero(M.dim)), 1024, 5000, 42, "exact", 4);
    if (!(ens.rejection.rate() < 0.01)) {
      ok = false;
      detail = "rejection rate " + std::to_string(ens.rejection.rate());
    }
  }
  report(9, ok, detail);
}

// 10. CLI determinism: identical seeds give identical bytes, workers don't matter
void criterion10() {
  const std::string cli = HOLOMC_CLI_PATH;
  const std::string config = std::string(HOLOMC_CONFIG_DIR) + "/dist_circle_flat.json";
  auto run = [&](const std::string& out, const std::string& extra) {
    const std::string cmd =
        cli + " dist --config " + config + " --out " + out + extra + " > /dev/null";
    return std::system(cmd.c_str());
  };
  bool ok = true;
  std::string detail;
  if (run("/tmp/holomc_acc_a", "") != 0 || run("/tmp/holomc_acc_b", "") != 0 ||
      run("/tmp/holomc_acc_c", " --workers 8") != 0) {
    ok = false;
    detail = "cli run failed";
  } else {
    const std::string a = read_file("/tmp/holomc_acc_a/measure.json");
    const std::string b = read_file("/tmp/holomc_acc_b/measure.json");
    const std::string c = read_file("/tmp/holomc_acc_c/measure.json");
    if (a.empty() || a != b) {
      ok = false;
      detail = "reruns differ";
    }
    if (a != c) {
      ok = false;
      detail = "worker count changed the measure";
    }
  }
  report(10, ok, detail);
}

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  return failures;
}
