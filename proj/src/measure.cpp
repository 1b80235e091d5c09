#include "holomc/measure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace holomc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTwoPi = 2.0 * kPi;

double frac(double a) {
  a -= std::floor(a);
  return (a >= 1.0) ? 0.0 : a;
}

double arc_dist(double a, double b) {
  const double d = std::abs(frac(a) - frac(b));
  return kTwoPi * std::min(d, 1.0 - d);
}

}  // namespace

HolonomyElement u1_element(double angle) {
  HolonomyElement h;
  h.has_u1 = true;
  h.angle = frac(angle);
  const double a = kTwoPi * h.angle;
  h.Q.resize(2, 2);
  h.Q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return h;
}

namespace {

void normalize(HolonomyMeasure& mu) {
  double total = 0.0;
  for (const auto& a : mu.atoms) total += a.weight;
  if (!(total > 0.0)) throw EmptySample("measure has no positive mass");
  for (auto& a : mu.atoms) a.weight /= total;
}

// exact circle W1 in arc-length units: weighted-median shift of the CDF gap
double w1_circle(const HolonomyMeasure& mu, const HolonomyMeasure& nu) {
  std::vector<std::pair<double, double>> ev;  // (angle, signed mass)
  ev.reserve(mu.atoms.size() + nu.atoms.size());
  for (const auto& a : mu.atoms) ev.emplace_back(frac(a.h.angle), a.weight);
  for (const auto& a : nu.atoms) ev.emplace_back(frac(a.h.angle), -a.weight);
  std::sort(ev.begin(), ev.end());
  std::vector<double> bp, D;
  double cum = 0.0;
  for (std::size_t i = 0; i < ev.size();) {
    const double ang = ev[i].first;
    while (i < ev.size() && ev[i].first == ang) cum += ev[i++].second;
    bp.push_back(ang);
    D.push_back(cum);
  }
  const std::size_t K = bp.size();
  if (K <= 1) return 0.0;
  std::vector<double> len(K);
  for (std::size_t j = 0; j + 1 < K; ++j) len[j] = bp[j + 1] - bp[j];
  len[K - 1] = bp[0] + 1.0 - bp[K - 1];
  // optimal rotation constant: len-weighted median of the gaps D_j
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return D[a] < D[b]; });
  double acc = 0.0, cstar = D[order.back()];
  for (const std::size_t j : order) {
    acc += len[j];
    if (acc >= 0.5) {
      cstar = D[j];
      break;
    }
  }
  double w1 = 0.0;
  for (std::size_t j = 0; j < K; ++j) w1 += len[j] * std::abs(D[j] - cstar);
  return kTwoPi * w1;
}

// expectation vector over the O(r) test dictionary, each entry Lipschitz <= 1
// in Frobenius distance
std::vector<double> dictionary_moments(const HolonomyMeasure& mu) {
  const int r = mu.rank;
  std::vector<double> mom;
  Eigen::MatrixXd lin = Eigen::MatrixXd::Zero(r, r);
  for (const auto& a : mu.atoms) lin += a.weight * a.h.Q;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) mom.push_back(lin(i, j));
  const int n2 = r * r;
  std::vector<double> quad(static_cast<std::size_t>(n2) * n2, 0.0);
  for (const auto& a : mu.atoms) {
    Eigen::Map<const Eigen::VectorXd> q(a.h.Q.data(), n2);
    for (int u = 0; u < n2; ++u)
      for (int v = u; v < n2; ++v) quad[u * n2 + v] += a.weight * q[u] * q[v];
  }
  for (int u = 0; u < n2; ++u)
    for (int v = u; v < n2; ++v) mom.push_back(0.5 * quad[u * n2 + v]);
  const double sr = std::sqrt(static_cast<double>(r));
  for (int k = 1; k <= 4; ++k) {
    double t = 0.0;
    for (const auto& a : mu.atoms) {
      Eigen::MatrixXd P = a.h.Q;
      for (int j = 1; j < k; ++j) P = P * a.h.Q;
      t += a.weight * P.trace();
    }
    mom.push_back(t / (k * sr));
  }
  return mom;
}

}  // namespace

HolonomyMeasure empirical_measure(const std::vector<MeasureAtom>& samples) {
  if (samples.empty()) throw EmptySample("empirical_measure: no samples");
  HolonomyMeasure mu;
  mu.kind = MeasureKind::Empirical;
  mu.rank = static_cast<int>(samples.front().h.Q.rows());
  mu.u1 = true;
  mu.atoms = samples;
  for (const auto& a : mu.atoms) {
    if (a.h.Q.rows() != mu.rank) throw DimensionMismatch("empirical_measure: mixed ranks");
    if (a.weight < 0.0) throw ConfigError("empirical_measure: negative weight");
    mu.u1 = mu.u1 && a.h.has_u1;
  }
  normalize(mu);
  mu.meta.samples = static_cast<long long>(samples.size());
  return mu;
}

HolonomyMeasure analytic_flat_u1(const Manifold& M, const FlatU1Form& F, double tail) {
  if (!(tail > 0.0) || tail > 1e-6) throw ConfigError("analytic_flat_u1: tail in (0, 1e-6]");
  const WindingTable T = winding_table(M, tail);
  HolonomyMeasure mu;
  mu.kind = MeasureKind::Analytic;
  mu.rank = 2;
  mu.u1 = true;
  for (std::size_t i = 0; i < T.atoms.size(); ++i) {
    MeasureAtom a;
    a.h = u1_element(flat_u1_holonomy_angle(F, T.atoms[i]));
    a.weight = T.weights[i];
    mu.atoms.push_back(a);
  }
  mu.meta.deficit = T.omitted_mass;
  HolonomyMeasure out = aggregate_angles(mu, 1e-12);
  out.kind = MeasureKind::Analytic;
  out.meta = mu.meta;
  return out;
}

HolonomyMeasure aggregate_angles(const HolonomyMeasure& mu, double tol) {
  if (!mu.u1) throw ConfigError("aggregate_angles needs the U(1) view");
  std::vector<MeasureAtom> sorted = mu.atoms;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const MeasureAtom& a, const MeasureAtom& b) { return a.h.angle < b.h.angle; });
  HolonomyMeasure out = mu;
  out.atoms.clear();
  std::size_t i = 0;
  while (i < sorted.size()) {
    double mass = sorted[i].weight;
    double zc = std::cos(kTwoPi * sorted[i].h.angle) * sorted[i].weight;
    double zs = std::sin(kTwoPi * sorted[i].h.angle) * sorted[i].weight;
    std::size_t j = i + 1;
    while (j < sorted.size() &&
           kTwoPi * (sorted[j].h.angle - sorted[j - 1].h.angle) <= tol) {
      mass += sorted[j].weight;
      zc += std::cos(kTwoPi * sorted[j].h.angle) * sorted[j].weight;
      zs += std::sin(kTwoPi * sorted[j].h.angle) * sorted[j].weight;
      ++j;
    }
    MeasureAtom a;
    const double ang = (j == i + 1) ? sorted[i].h.angle
                                    : frac(std::atan2(zs, zc) / kTwoPi);
    a.h = u1_element(ang);
    a.weight = mass;
    out.atoms.push_back(a);
    i = j;
  }
  // wrap-around merge: last cluster may touch the first across angle 0
  if (out.atoms.size() > 1 && tol > 0.0) {
    const double gap = kTwoPi * (out.atoms.front().h.angle + 1.0 - out.atoms.back().h.angle);
    if (gap <= tol) {
      MeasureAtom last = out.atoms.back();
      out.atoms.pop_back();
      MeasureAtom& first = out.atoms.front();
      const double w = first.weight + last.weight;
      const double zc = std::cos(kTwoPi * first.h.angle) * first.weight +
                        std::cos(kTwoPi * last.h.angle) * last.weight;
      const double zs = std::sin(kTwoPi * first.h.angle) * first.weight +
                        std::sin(kTwoPi * last.h.angle) * last.weight;
      first.h = u1_element(frac(std::atan2(zs, zc) / kTwoPi));
      first.weight = w;
    }
  }
  normalize(out);
  return out;
}

double bl_distance(const HolonomyMeasure& mu, const HolonomyMeasure& nu) {
  if (mu.rank != nu.rank) throw DimensionMismatch("bl_distance: group dimensions differ");
  if (mu.atoms.empty() || nu.atoms.empty()) throw EmptySample("bl_distance: empty measure");
  if (mu.u1 && nu.u1) return w1_circle(mu, nu);
  const auto a = dictionary_moments(mu);
  const auto b = dictionary_moments(nu);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double arc_mass(const HolonomyMeasure& mu, double eps) {
  if (!mu.u1) throw ConfigError("arc_mass needs the U(1) view");
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("arc_mass: eps in (0, 1/2)");
  double mass = 0.0;
  for (const auto& a : mu.atoms) {
    const double t = frac(a.h.angle);
    if (t > eps && t < 1.0 - eps) mass += a.weight;
  }
  return mass;
}

std::vector<SupportCluster> support_estimate(const HolonomyMeasure& mu, double merge_tol) {
  if (!(merge_tol > 0.0)) throw ConfigError("support_estimate: merge_tol > 0");
  if (mu.atoms.empty()) throw EmptySample("support_estimate: empty measure");
  const std::size_t n = mu.atoms.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  if (mu.u1) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return mu.atoms[a].h.angle < mu.atoms[b].h.angle;
    });
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (arc_dist(mu.atoms[order[k]].h.angle, mu.atoms[order[k + 1]].h.angle) < merge_tol)
        parent[find(order[k])] = find(order[k + 1]);
    }
    if (n > 1 && arc_dist(mu.atoms[order.back()].h.angle, mu.atoms[order.front()].h.angle) <
                     merge_tol)
      parent[find(order.back())] = find(order.front());
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if ((mu.atoms[i].h.Q - mu.atoms[j].h.Q).norm() < merge_tol)
          parent[find(i)] = find(j);
  }
  std::vector<SupportCluster> out;
  std::vector<int> slot(n, -1);
  std::vector<Eigen::MatrixXd> sums;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.size());
      out.push_back({});
      sums.push_back(Eigen::MatrixXd::Zero(mu.rank, mu.rank));
    }
    out[slot[r]].mass += mu.atoms[i].weight;
    sums[slot[r]] += mu.atoms[i].weight * mu.atoms[i].h.Q;
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].center.Q = polar_project(sums[c]);
    if (mu.u1) {
      out[c].center.has_u1 = true;
      out[c].center.angle = rotation_angle(out[c].center.Q);
    }
  }
  std::sort(out.begin(), out.end(), [&](const SupportCluster& a, const SupportCluster& b) {
    if (mu.u1) return a.center.angle < b.center.angle;
    return a.mass > b.mass;
  });
  return out;
}

U1Histogram u1_histogram(const HolonomyMeasure& mu, int bins) {
  if (!mu.u1) throw ConfigError("u1_histogram needs the U(1) view");
  if (bins < 1) throw ConfigError("u1_histogram: bins >= 1");
  U1Histogram h;
  h.bins = bins;
  h.mass.assign(bins, 0.0);
  for (const auto& a : mu.atoms) {
    int b = static_cast<int>(std::floor(frac(a.h.angle) * bins));
    if (b >= bins) b = bins - 1;
    h.mass[b] += a.weight;
  }
  return h;
}

}  // namespace holomc
