// Independent reference implementations used only by the tests.  These
// deliberately avoid the library's own code paths: theta sums are direct,
// Legendre polynomials come from the standard library, quadrature is plain
// trapezoid / Gauss-Legendre.
#pragma once

#include <cmath>
#include <vector>

namespace oracle {

inline constexpr double pi = 3.14159265358979323846264338327950288;

// winding weight e^{-(L nu)^2/4} / Z on a circle of circumference L
inline double circle_weight(int nu, double L = 1.0, int cutoff = 64) {
  double z = 0.0;
  for (int k = -cutoff; k <= cutoff; ++k) z += std::exp(-(L * k) * (L * k) / 4.0);
  return std::exp(-(L * nu) * (L * nu) / 4.0) / z;
}

// circle heat kernel by image sum
inline double circle_heat_kernel(double L, double s, double d, int cutoff = 64) {
  double p = 0.0;
  for (int k = -cutoff; k <= cutoff; ++k) {
    const double u = d + k * L;
    p += std::exp(-u * u / (4.0 * s));
  }
  return p / std::sqrt(4.0 * pi * s);
}

// square-torus heat kernel by double image sum
inline double torus2_heat_kernel(double s, double dx, double dy, int cutoff = 32) {
  double p = 0.0;
  for (int a = -cutoff; a <= cutoff; ++a)
    for (int b = -cutoff; b <= cutoff; ++b) {
      const double u = dx + a, v = dy + b;
      p += std::exp(-(u * u + v * v) / (4.0 * s));
    }
  return p / (4.0 * pi * s);
}

// sphere heat kernel via the spectral sum with std::legendre
inline double sphere_heat_kernel(double s, double dist, int lmax = 200) {
  const double x = std::cos(dist);
  double p = 0.0;
  for (int l = 0; l <= lmax; ++l)
    p += (2.0 * l + 1.0) / (4.0 * pi) * std::exp(-l * (l + 1.0) * s) * std::legendre(l, x);
  return p;
}

// Gauss-Legendre nodes/weights on [a, b], 32 points
inline void gauss32(double a, double b, std::vector<double>& x, std::vector<double>& w) {
  static const double n[16] = {
      0.0483076656877383162, 0.1444719615827964934, 0.2392873622521370745,
      0.3318686022821276498, 0.4213512761306353454, 0.5068999089322293900,
      0.5877157572407623290, 0.6630442669302152009, 0.7321821187402896804,
      0.7944837959679424069, 0.8493676137325699701, 0.8963211557660521240,
      0.9349060759377396892, 0.9647622555875064307, 0.9856115115452683354,
      0.9972638618494815635};
  static const double ww[16] = {
      0.0965400885147278006, 0.0956387200792748594, 0.0938443990808045654,
      0.0911738786957638847, 0.0876520930044038111, 0.0833119242269467552,
      0.0781938957870703065, 0.0723457941088485062, 0.0658222227763618468,
      0.0586840934785355471, 0.0509980592623761762, 0.0428358980222266807,
      0.0342738629130214331, 0.0253920653092620595, 0.0162743947309056706,
      0.0070186100094700966};
  x.clear();
  w.clear();
  const double c = 0.5 * (b - a), m = 0.5 * (a + b);
  for (int i = 0; i < 16; ++i) {
    x.push_back(m - c * n[i]);
    w.push_back(c * ww[i]);
    x.push_back(m + c * n[i]);
    w.push_back(c * ww[i]);
  }
}

// spherical area integral of the heat kernel (should be 1)
inline double sphere_kernel_mass(double s) {
  std::vector<double> x, w;
  gauss32(0.0, pi, x, w);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    total += w[i] * sphere_heat_kernel(s, x[i]) * 2.0 * pi * std::sin(x[i]);
  return total;
}

// brute-force circular W1 between two atom lists: minimize the shifted CDF
// integral over a dense grid of shift constants
inline double w1_circle_brute(const std::vector<std::pair<double, double>>& mu,
                              const std::vector<std::pair<double, double>>& nu,
                              int grid = 4000) {
  auto cdf_gap = [&](double x) {
    double f = 0.0;
    for (const auto& [a, w] : mu)
      if (a <= x) f += w;
    for (const auto& [a, w] : nu)
      if (a <= x) f -= w;
    return f;
  };
  double best = 1e300;
  for (int g = 0; g < grid; ++g) {
    const double c = -1.0 + 2.0 * g / grid;
    double total = 0.0;
    const int steps = 2000;
    for (int i = 0; i < steps; ++i) {
      const double x = (i + 0.5) / steps;
      total += std::abs(cdf_gap(x) - c) / steps;
    }
    best = std::min(best, total);
  }
  return 2.0 * pi * best;
}

}  // namespace oracle
