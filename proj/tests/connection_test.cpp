#include <cmath>

#include "doctest.h"
#include "holomc/connection.hpp"
#include "holomc/rng.hpp"

using namespace holomc;

namespace {
Point pt1(double x) { return (Eigen::VectorXd(1) << x).finished(); }
Point pt2(double x, double y) { return (Eigen::VectorXd(2) << x, y).finished(); }
Eigen::VectorXd periods1(double t) { return (Eigen::VectorXd(1) << t).finished(); }
Eigen::VectorXd periods2(double a, double b) { return (Eigen::VectorXd(2) << a, b).finished(); }
}  // namespace

TEST_CASE("coefficients are skew symmetric") {
  const Manifold t2 = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  RngStream rng(11, 0);
  std::vector<MetricConnection> conns = {
      MetricConnection::flat_u1(t2, periods2(0.3, 0.6), 0.5),
      MetricConnection::sin_form(t2, 1.3),
  };
  for (const auto& C : conns) {
    for (int trial = 0; trial < 20; ++trial) {
      const Point x = reduce_point(t2, pt2(rng.uniform(), rng.uniform()));
      for (const auto& g : evaluate_gamma(C, x)) CHECK((g + g.transpose()).norm() < 1e-14);
    }
  }
  const MetricConnection S = MetricConnection::levi_civita_sphere();
  const Point eq = (Eigen::VectorXd(3) << std::sqrt(0.5), 0.0, std::sqrt(0.5)).finished();
  for (const auto& g : evaluate_gamma(S, eq)) CHECK((g + g.transpose()).norm() < 1e-14);
}

TEST_CASE("analytic curvature matches finite differences") {
  const Manifold t2 = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  RngStream rng(12, 0);
  std::vector<MetricConnection> conns = {
      MetricConnection::flat_u1(t2, periods2(0.3, 0.6), 0.7),
      MetricConnection::sin_form(t2, 1.0),
      MetricConnection::trivial(t2),
  };
  for (const auto& C : conns) {
    for (int trial = 0; trial < 10; ++trial) {
      const Point x = reduce_point(t2, pt2(rng.uniform(), rng.uniform()));
      const auto Fa = curvature(C, x);
      const auto Fn = curvature_fd(C, x);
      REQUIRE(Fa.size() == Fn.size());
      for (std::size_t k = 0; k < Fa.size(); ++k) CHECK((Fa[k] - Fn[k]).norm() < 1e-6);
    }
  }
}

TEST_CASE("flat u1 curvature vanishes exactly") {
  const Manifold t2 = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  const MetricConnection C = MetricConnection::flat_u1(t2, periods2(0.3, 0.6), 0.5);
  for (const auto& F : curvature(C, pt2(0.17, 0.62))) CHECK(F.norm() == 0.0);
}

TEST_CASE("sin form curvature closed form") {
  const Manifold t2 = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  const double a = 1.0;
  const MetricConnection C = MetricConnection::sin_form(t2, a);
  const Point x = pt2(0.2, 0.9);
  const auto F = curvature(C, x);
  REQUIRE(F.size() == 1);
  const double expected = 2.0 * M_PI * a * std::cos(2.0 * M_PI * 0.2);
  CHECK(F[0](1, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("winding angle arithmetic") {
  FlatU1Form F;
  F.periods = periods1(0.3);
  Eigen::VectorXi nu(1);
  nu << 1;
  CHECK(flat_u1_holonomy_angle(F, nu) == doctest::Approx(0.3).epsilon(1e-15));
  nu << -1;
  CHECK(flat_u1_holonomy_angle(F, nu) == doctest::Approx(0.7).epsilon(1e-15));
  nu << 10;
  CHECK(flat_u1_holonomy_angle(F, nu) == doctest::Approx(0.0).epsilon(1e-12));
  FlatU1Form Q;
  Q.periods = periods1(0.25);
  nu << 5;
  CHECK(flat_u1_holonomy_angle(Q, nu) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("connection families blend linearly") {
  const Manifold c = Manifold::circle(1.0);
  ConnectionFamily fam;
  fam.base = MetricConnection::trivial(c);
  fam.delta = MetricConnection::flat_u1(c, periods1(0.7));
  fam.schedule = {1.0, 0.5, 0.25};
  const MetricConnection half = fam.member(0.5);
  CHECK(half.type == ConnectionType::FlatU1);
  CHECK(half.u1.periods[0] == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(fam.member(0.0).u1.periods[0] == 0.0);
  const double d1 = family_c0_deviation(fam, 1.0);
  const double dh = family_c0_deviation(fam, 0.5);
  CHECK(dh == doctest::Approx(0.5 * d1).epsilon(1e-12));
}

TEST_CASE("sphere chart pole is rejected") {
  const MetricConnection S = MetricConnection::levi_civita_sphere();
  const Point np = (Eigen::VectorXd(3) << 0.0, 0.0, 1.0).finished();
  CHECK_THROWS_AS(evaluate_gamma(S, np), ChartUndefined);
}

TEST_CASE("connection constructors validate their domain") {
  const Manifold c = Manifold::circle(1.0);
  CHECK_THROWS_AS(MetricConnection::sin_form(c, 1.0), ConfigError);
  CHECK_THROWS_AS(MetricConnection::flat_u1(c, periods2(0.1, 0.2)), ConfigError);
}
