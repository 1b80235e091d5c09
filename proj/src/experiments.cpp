#include "holomc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

namespace holomc {

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr long long kRetryCap = 1000000;

double frac(double a) {
  a -= std::floor(a);
  return (a >= 1.0) ? 0.0 : a;
}

double arc01(double a, double b) {  // arc-length distance on the unit circle
  const double d = std::abs(frac(a) - frac(b));
  return kTwoPi * std::min(d, 1.0 - d);
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void parallel_blocks(long long n, int workers,
                     const std::function<void(int, long long, long long)>& fn) {
  if (workers < 1) workers = 1;
  if (workers == 1 || n < 2) {
    fn(0, 0, n);
    return;
  }
  const long long chunk = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    const long long b = w * chunk;
    const long long e = std::min(n, b + chunk);
    if (b >= e) break;
    threads.emplace_back(fn, w, b, e);
  }
  for (auto& t : threads) t.join();
}

LoopVertices draw_admissible(const Manifold& M, const Point& x, int m, bool exact,
                             RngStream& rng, long long& attempts) {
  const double rv = rho(M);
  for (long long k = 0; k < kRetryCap; ++k) {
    ++attempts;
    LoopVertices v = exact ? sample_bridge_torus(M, x, m, rng) : sample_bridge_is(M, x, m, rng);
    if (admissible(M, v, rv)) return v;
  }
  throw ProposalFailure("admissibility retry cap exceeded; the deficit at this m is near 1, "
                        "use a finer partition");
}

Eigen::VectorXi loop_winding(const Manifold& M, const LoopVertices& v) {
  Point total = Point::Zero(M.dim);
  Point prev = v.base;
  for (const auto& p : v.vertices) {
    total += nearest_increment(M, prev, p);
    prev = p;
  }
  total += nearest_increment(M, prev, v.base);
  const Eigen::VectorXd nu_real = M.basis_inv * total;
  Eigen::VectorXi nu(M.dim);
  for (int i = 0; i < M.dim; ++i) {
    const double r = std::round(nu_real[i]);
    if (std::abs(nu_real[i] - r) >= 1e-9) throw LiftDefect("winding lift defect");
    nu[i] = static_cast<int>(r);
  }
  return nu;
}

bool sampler_exact(const std::string& sampler) {
  if (sampler == "exact") return true;
  if (sampler == "is") return false;
  throw ConfigError("sampler must be \"exact\" or \"is\"");
}

// conservative last-three-point geometric extrapolation; falls back to the
// last value whenever the fit is not a clean decay
double geometric_limit(double v1, double v2, double v3) {
  const double d1 = v2 - v1, d2 = v3 - v2;
  if (std::abs(d1) < 1e-300) return v3;
  const double r = d2 / d1;
  if (!(r > 0.0) || r >= 0.95) return v3;
  return std::max(0.0, v3 + d2 * r / (1.0 - r));
}

}  // namespace

// --- sampling ---------------------------------------------------------------

Ensemble sample_ensemble(const Manifold& M, const Point& x, int m, long long n,
                         std::uint64_t seed, const std::string& sampler, int workers) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  const bool exact = sampler_exact(sampler);
  Ensemble ens;
  ens.loops.resize(n);
  std::vector<long long> attempts(workers < 1 ? 1 : workers, 0);
  parallel_blocks(n, workers, [&](int w, long long b, long long e) {
    for (long long i = b; i < e; ++i) {
      RngStream rng(seed, static_cast<std::uint64_t>(i));
      ens.loops[i] = draw_admissible(M, x, m, exact, rng, attempts[w]);
    }
  });
  for (const long long a : attempts) ens.rejection.attempted += a;
  ens.rejection.accepted = n;
  ens.rejection.rejected = ens.rejection.attempted - n;
  return ens;
}

WindingEnsemble sample_windings(const Manifold& M, const Point& x, int m, long long n,
                                std::uint64_t seed, const std::string& sampler, int workers) {
  if (!M.flat()) throw ConfigError("sample_windings: flat members only");
  if (n < 1) throw ConfigError("sample count must be >= 1");
  const bool exact = sampler_exact(sampler);
  std::vector<Eigen::VectorXi> per_index(n);
  WindingEnsemble ens;
  ens.weights.assign(n, 1.0);
  std::vector<long long> attempts(workers < 1 ? 1 : workers, 0);
  parallel_blocks(n, workers, [&](int w, long long b, long long e) {
    for (long long i = b; i < e; ++i) {
      RngStream rng(seed, static_cast<std::uint64_t>(i));
      const LoopVertices v = draw_admissible(M, x, m, exact, rng, attempts[w]);
      per_index[i] = loop_winding(M, v);
      ens.weights[i] = v.weight;
    }
  });
  for (const long long a : attempts) ens.rejection.attempted += a;
  ens.rejection.accepted = n;
  ens.rejection.rejected = ens.rejection.attempted - n;
  std::map<std::vector<int>, int> ids;
  ens.class_of.resize(n);
  for (long long i = 0; i < n; ++i) {
    std::vector<int> key(per_index[i].data(), per_index[i].data() + per_index[i].size());
    auto it = ids.find(key);
    if (it == ids.end()) {
      it = ids.emplace(key, static_cast<int>(ens.classes.size())).first;
      ens.classes.push_back(per_index[i]);
    }
    ens.class_of[i] = it->second;
  }
  return ens;
}

std::vector<double> class_masses(const WindingEnsemble& ens) {
  std::vector<double> mass(ens.classes.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < ens.class_of.size(); ++i) {
    mass[ens.class_of[i]] += ens.weights[i];
    total += ens.weights[i];
  }
  for (auto& v : mass) v /= total;
  return mass;
}

HolonomyMeasure winding_measure(const WindingEnsemble& ens, const FlatU1Form& F) {
  const std::vector<double> mass = class_masses(ens);
  std::vector<MeasureAtom> atoms;
  atoms.reserve(mass.size());
  for (std::size_t c = 0; c < mass.size(); ++c) {
    MeasureAtom a;
    a.h = u1_element(flat_u1_holonomy_angle(F, ens.classes[c]));
    a.weight = mass[c];
    atoms.push_back(a);
  }
  HolonomyMeasure mu = empirical_measure(atoms);
  mu.meta.samples = static_cast<long long>(ens.class_of.size());
  mu.meta.deficit = ens.rejection.rate();
  HolonomyMeasure out = aggregate_angles(mu, 1e-12);
  out.meta = mu.meta;
  return out;
}

HolonomyMeasure transported_measure(const MetricConnection& C, const Ensemble& ens,
                                    const std::string& transport, int steps_per_segment,
                                    int ito_substeps, std::uint64_t seed, int workers) {
  const long long n = static_cast<long long>(ens.loops.size());
  std::string mode = transport;
  if (mode == "auto") mode = (C.is_u1() && C.manifold.flat()) ? "exact-u1" : "ode";
  std::vector<MeasureAtom> atoms(n);
  parallel_blocks(n, workers, [&](int, long long b, long long e) {
    for (long long i = b; i < e; ++i) {
      const LoopVertices& v = ens.loops[i];
      HolonomyElement h;
      if (mode == "ode") {
        h = holonomy(C, build_loop(C.manifold, v), steps_per_segment);
      } else if (mode == "exact-u1") {
        h = holonomy_u1_exact(C, build_loop(C.manifold, v));
      } else if (mode == "ito") {
        RngStream rng(seed ^ 0x49746f5ULL, static_cast<std::uint64_t>(i));
        h = transport_ito_euler(C, v, ito_substeps, rng);
      } else {
        throw ConfigError("transport must be auto, ode, exact-u1 or ito");
      }
      atoms[i] = {h, v.weight};
    }
  });
  HolonomyMeasure mu = empirical_measure(atoms);
  mu.meta.deficit = ens.rejection.rate();
  if (mu.u1) {
    HolonomyMeasure out = aggregate_angles(mu, C.is_u1() ? 1e-12 : 0.0);
    out.meta = mu.meta;
    return out;
  }
  return mu;
}

double bootstrap_sigma(const HolonomyMeasure& mu, const HolonomyMeasure& ref, int resamples,
                       std::uint64_t seed) {
  const long long n = mu.meta.samples > 0 ? mu.meta.samples
                                          : static_cast<long long>(mu.atoms.size());
  std::vector<double> cdf;
  cdf.reserve(mu.atoms.size());
  double acc = 0.0;
  for (const auto& a : mu.atoms) {
    acc += a.weight;
    cdf.push_back(acc);
  }
  std::vector<double> dist(resamples, 0.0);
  for (int r = 0; r < resamples; ++r) {
    RngStream rng(seed ^ 0xB005B005ULL, static_cast<std::uint64_t>(r));
    std::vector<long long> count(mu.atoms.size(), 0);
    for (long long i = 0; i < n; ++i) {
      const double u = rng.uniform() * acc;
      const std::size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
      ++count[std::min(k, count.size() - 1)];
    }
    HolonomyMeasure res = mu;
    res.atoms.clear();
    for (std::size_t k = 0; k < count.size(); ++k) {
      if (!count[k]) continue;
      MeasureAtom a = mu.atoms[k];
      a.weight = static_cast<double>(count[k]) / n;
      res.atoms.push_back(a);
    }
    dist[r] = bl_distance(res, ref);
  }
  double mean = 0.0;
  for (const double d : dist) mean += d;
  mean /= resamples;
  double var = 0.0;
  for (const double d : dist) var += (d - mean) * (d - mean);
  return std::sqrt(var / std::max(1, resamples - 1));
}

// --- config -----------------------------------------------------------------

namespace {

Manifold parse_manifold(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "circle") return Manifold::circle(j.value("circumference", 1.0));
  if (kind == "flat_torus") {
    const auto& jb = j.at("basis");
    const int n = static_cast<int>(jb.size());
    Eigen::MatrixXd B(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) B(r, c) = jb[r][c].get<double>();
    return Manifold::flat_torus(B);
  }
  if (kind == "sphere2") return Manifold::sphere2();
  throw ConfigError("unknown manifold kind: " + kind);
}

MetricConnection parse_connection(const nlohmann::json& j, const Manifold& M) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "trivial") return MetricConnection::trivial(M);
  if (type == "flat_u1") {
    const auto& jp = j.at("periods");
    Eigen::VectorXd p(jp.size());
    for (std::size_t i = 0; i < jp.size(); ++i) p[i] = jp[i].get<double>();
    return MetricConnection::flat_u1(M, p, j.value("osc_amplitude", 0.0));
  }
  if (type == "sin_form") return MetricConnection::sin_form(M, j.at("amplitude").get<double>());
  if (type == "levi_civita") return MetricConnection::levi_civita_sphere();
  throw ConfigError("unknown connection type: " + type);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.config_hash = fnv1a(text);
  cfg.manifold = parse_manifold(j.at("manifold"));
  if (j.contains("connection")) cfg.connection = parse_connection(j["connection"], cfg.manifold);
  if (j.contains("family")) {
    ConnectionFamily fam;
    fam.base = j["family"].contains("base")
                   ? parse_connection(j["family"]["base"], cfg.manifold)
                   : MetricConnection::trivial(cfg.manifold);
    fam.delta = parse_connection(j["family"].at("delta"), cfg.manifold);
    for (const auto& t : j["family"].at("schedule")) fam.schedule.push_back(t.get<double>());
    cfg.schedule = fam.schedule;
    cfg.family = fam;
  }
  if (j.contains("base_point")) {
    const auto& jb = j["base_point"];
    Point x(jb.size());
    for (std::size_t i = 0; i < jb.size(); ++i) x[i] = jb[i].get<double>();
    cfg.base = reduce_point(cfg.manifold, x);
  } else if (cfg.manifold.flat()) {
    cfg.base = reduce_point(cfg.manifold, Point::Zero(cfg.manifold.dim));
  } else {
    cfg.base = Point(3);
    cfg.base << 1.0, 0.0, 0.0;
  }
  if (j.contains("m")) cfg.m_schedule = {j["m"].get<int>()};
  if (j.contains("m_schedule"))
    for (const auto& m : j["m_schedule"]) cfg.m_schedule.push_back(m.get<int>());
  cfg.samples = j.value("samples", 0LL);
  if (j.contains("seed")) {
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.has_seed = true;
  }
  cfg.sampler = j.value("sampler", std::string("exact"));
  cfg.transport = j.value("transport", std::string("auto"));
  cfg.steps_per_segment = j.value("steps_per_segment", 0);
  cfg.ito_substeps = j.value("ito_substeps", 4);
  if (j.contains("eps")) {
    cfg.eps.clear();
    for (const auto& e : j["eps"]) cfg.eps.push_back(e.get<double>());
  }
  cfg.merge_tol = j.value("merge_tol", 0.01);
  cfg.threshold = j.value("threshold", -1.0);
  cfg.subgroup_q = j.value("subgroup_q", 1);
  cfg.loops = j.value("loops", 100);
  cfg.workers = j.value("workers", 1);
  return cfg;
}

// --- runs -------------------------------------------------------------------

namespace {

void require_m(const ExperimentConfig& cfg) {
  if (cfg.m_schedule.empty()) throw ConfigError("config needs \"m\" or \"m_schedule\"");
}

// single-m pipeline measure under cfg's sampling settings
HolonomyMeasure pipeline_measure(const ExperimentConfig& cfg, const MetricConnection& C, int m) {
  if (cfg.samples < 1) throw ConfigError("config needs \"samples\" >= 1");
  HolonomyMeasure mu;
  if (C.is_flat_u1() && C.manifold.flat() && cfg.transport == "auto") {
    const WindingEnsemble ens =
        sample_windings(C.manifold, cfg.base, m, cfg.samples, cfg.seed, cfg.sampler, cfg.workers);
    const FlatU1Form F = (C.type == ConnectionType::FlatU1)
                             ? C.u1
                             : FlatU1Form{Eigen::VectorXd::Zero(C.manifold.dim), 0.0};
    mu = winding_measure(ens, F);
  } else {
    if (cfg.samples * static_cast<long long>(m) > 20000000LL)
      throw ConfigError("samples * m too large for the stored-loop transport path; "
                        "reduce samples or use transport \"auto\" on a flat U(1) setup");
    const Ensemble ens =
        sample_ensemble(C.manifold, cfg.base, m, cfg.samples, cfg.seed, cfg.sampler, cfg.workers);
    mu = transported_measure(C, ens, cfg.transport, cfg.steps_per_segment, cfg.ito_substeps,
                             cfg.seed, cfg.workers);
    mu.meta.samples = cfg.samples;
  }
  mu.meta.m = m;
  mu.meta.seed = cfg.seed;
  return mu;
}

std::string report_head(const ExperimentConfig& cfg, const std::string& command) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"command\": \"" << command << "\",\n";
  os << "  \"version\": \"" << kVersion << "\",\n";
  os << "  \"config_hash\": \"" << hex64(cfg.config_hash) << "\",\n";
  os << "  \"seed\": " << cfg.seed << ",\n";
  os << "  \"workers\": " << cfg.workers << ",\n";
  return os.str();
}

std::string csv_histogram(const HolonomyMeasure& mu, int bins) {
  const U1Histogram h = u1_histogram(mu, bins);
  std::ostringstream os;
  os << "bin_lo,bin_hi,mass\n";
  for (int b = 0; b < bins; ++b)
    os << format_double(static_cast<double>(b) / bins) << ","
       << format_double(static_cast<double>(b + 1) / bins) << "," << format_double(h.mass[b])
       << "\n";
  return os.str();
}

}  // namespace

RunReport run_distribution(const ExperimentConfig& cfg) {
  if (!cfg.connection) throw ConfigError("dist needs a \"connection\"");
  require_m(cfg);
  const int m = cfg.m_schedule.front();
  const HolonomyMeasure mu = pipeline_measure(cfg, *cfg.connection, m);
  const double deficit_threshold = cfg.threshold > 0.0 ? cfg.threshold : 0.01;
  RunReport rep;
  rep.pass = mu.meta.deficit < deficit_threshold;
  std::ostringstream os;
  os << report_head(cfg, "dist");
  os << "  \"m\": " << m << ",\n";
  os << "  \"samples\": " << cfg.samples << ",\n";
  os << "  \"sampler\": \"" << cfg.sampler << "\",\n";
  os << "  \"transport\": \"" << cfg.transport << "\",\n";
  os << "  \"atoms\": " << mu.atoms.size() << ",\n";
  os << "  \"rejection_rate\": " << format_double(mu.meta.deficit) << ",\n";
  os << "  \"rejection_threshold\": " << format_double(deficit_threshold) << ",\n";
  os << "  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["measure.json"] = measure_to_json(mu);
  if (mu.u1) rep.files["histogram.csv"] = csv_histogram(mu, 64);
  return rep;
}

RunReport run_refinement(const ExperimentConfig& cfg) {
  if (!cfg.connection) throw ConfigError("refine needs a \"connection\"");
  require_m(cfg);
  if (cfg.m_schedule.size() < 2) throw ConfigError("refine needs an increasing m_schedule");
  for (std::size_t i = 1; i < cfg.m_schedule.size(); ++i)
    if (cfg.m_schedule[i] <= cfg.m_schedule[i - 1])
      throw ConfigError("m_schedule must be increasing");
  const MetricConnection& C = *cfg.connection;
  std::vector<HolonomyMeasure> mus;
  for (const int m : cfg.m_schedule) mus.push_back(pipeline_measure(cfg, C, m));
  HolonomyMeasure ref;
  std::string ref_kind;
  if (C.type == ConnectionType::FlatU1 && C.manifold.flat()) {
    ref = analytic_flat_u1(C.manifold, C.u1);
    ref_kind = "analytic";
  } else if (C.type == ConnectionType::Trivial) {
    ref = empirical_measure({{u1_element(0.0), 1.0}});
    ref_kind = "analytic";
  } else {
    ref = mus.back();
    ref_kind = "finest-m";
  }
  std::vector<double> dist, sigma;
  for (std::size_t k = 0; k < mus.size(); ++k) {
    dist.push_back(bl_distance(mus[k], ref));
    sigma.push_back(bootstrap_sigma(mus[k], ref, 200, cfg.seed ^ (0x5E1ULL + k)));
  }
  RunReport rep;
  for (std::size_t k = 0; k + 1 < dist.size(); ++k)
    if (dist[k + 1] > dist[k] + 3.0 * (sigma[k] + sigma[k + 1])) rep.pass = false;
  std::ostringstream os;
  os << report_head(cfg, "refine");
  os << "  \"reference\": \"" << ref_kind << "\",\n  \"rows\": [\n";
  std::ostringstream csv;
  csv << "m,distance,sigma\n";
  for (std::size_t k = 0; k < dist.size(); ++k) {
    os << "    {\"m\": " << cfg.m_schedule[k] << ", \"distance\": " << format_double(dist[k])
       << ", \"sigma\": " << format_double(sigma[k])
       << ", \"deficit\": " << format_double(mus[k].meta.deficit) << "}"
       << (k + 1 < dist.size() ? "," : "") << "\n";
    csv << cfg.m_schedule[k] << "," << format_double(dist[k]) << "," << format_double(sigma[k])
        << "\n";
  }
  os << "  ],\n  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["refinement.csv"] = csv.str();
  rep.files["measure_finest.json"] = measure_to_json(mus.back());
  return rep;
}

namespace {

// joint bootstrap under common random numbers: resample loop indices once,
// evaluate both members' measures on the resampled ensemble
double crn_sigma(const WindingEnsemble& ens, const FlatU1Form& Ft, const FlatU1Form& F0,
                 int resamples, std::uint64_t seed) {
  const long long n = static_cast<long long>(ens.class_of.size());
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (long long i = 0; i < n; ++i) {
    acc += ens.weights[i];
    cdf[i] = acc;
  }
  const std::size_t nc = ens.classes.size();
  std::vector<double> angle_t(nc), angle_0(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    angle_t[c] = flat_u1_holonomy_angle(Ft, ens.classes[c]);
    angle_0[c] = flat_u1_holonomy_angle(F0, ens.classes[c]);
  }
  std::vector<double> dist(resamples, 0.0);
  for (int r = 0; r < resamples; ++r) {
    RngStream rng(seed ^ 0xC12BULL, static_cast<std::uint64_t>(r));
    std::vector<double> mass(nc, 0.0);
    for (long long i = 0; i < n; ++i) {
      const double u = rng.uniform() * acc;
      const long long k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
      mass[ens.class_of[std::min(k, n - 1)]] += 1.0;
    }
    std::vector<MeasureAtom> at, a0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (mass[c] <= 0.0) continue;
      at.push_back({u1_element(angle_t[c]), mass[c]});
      a0.push_back({u1_element(angle_0[c]), mass[c]});
    }
    dist[r] = bl_distance(empirical_measure(at), empirical_measure(a0));
  }
  double mean = 0.0;
  for (const double d : dist) mean += d;
  mean /= resamples;
  double var = 0.0;
  for (const double d : dist) var += (d - mean) * (d - mean);
  return std::sqrt(var / std::max(1, resamples - 1));
}

FlatU1Form member_form(const ConnectionFamily& fam, double t) {
  const MetricConnection C = fam.member(t);
  if (C.type == ConnectionType::FlatU1) return C.u1;
  if (C.type == ConnectionType::Trivial)
    return FlatU1Form{Eigen::VectorXd::Zero(C.manifold.dim), 0.0};
  throw ConfigError("family member is not a flat U(1) connection");
}

bool flat_u1_family(const ConnectionFamily& fam) {
  return fam.base.manifold.flat() && fam.base.is_flat_u1() && fam.delta.is_flat_u1();
}

}  // namespace

RunReport run_family_convergence(const ExperimentConfig& cfg) {
  if (!cfg.family) throw ConfigError("family run needs a \"family\"");
  require_m(cfg);
  if (cfg.schedule.empty()) throw ConfigError("family needs a nonempty schedule");
  const ConnectionFamily& fam = *cfg.family;
  const int m = cfg.m_schedule.front();
  std::vector<double> dist, sigma;
  double deficit = 0.0;
  if (flat_u1_family(fam) && cfg.transport == "auto") {
    const WindingEnsemble ens = sample_windings(fam.base.manifold, cfg.base, m, cfg.samples,
                                                cfg.seed, cfg.sampler, cfg.workers);
    deficit = ens.rejection.rate();
    const FlatU1Form F0 = member_form(fam, 0.0);
    const HolonomyMeasure mu0 = winding_measure(ens, F0);
    for (const double t : cfg.schedule) {
      const FlatU1Form Ft = member_form(fam, t);
      dist.push_back(bl_distance(winding_measure(ens, Ft), mu0));
      sigma.push_back(crn_sigma(ens, Ft, F0, 200, cfg.seed + static_cast<std::uint64_t>(dist.size())));
    }
  } else {
    if (cfg.samples * static_cast<long long>(m) > 20000000LL)
      throw ConfigError("samples * m too large for the stored-loop family path");
    const Ensemble ens = sample_ensemble(fam.base.manifold, cfg.base, m, cfg.samples, cfg.seed,
                                         cfg.sampler, cfg.workers);
    deficit = ens.rejection.rate();
    const HolonomyMeasure mu0 =
        transported_measure(fam.member(0.0), ens, cfg.transport, cfg.steps_per_segment,
                            cfg.ito_substeps, cfg.seed, cfg.workers);
    for (const double t : cfg.schedule) {
      const HolonomyMeasure mt =
          transported_measure(fam.member(t), ens, cfg.transport, cfg.steps_per_segment,
                              cfg.ito_substeps, cfg.seed, cfg.workers);
      dist.push_back(bl_distance(mt, mu0));
      sigma.push_back(bootstrap_sigma(mt, mu0, 200, cfg.seed + static_cast<std::uint64_t>(dist.size())));
    }
  }
  const double floor_value = std::max(3.0 * sigma.back(), 1e-9);
  RunReport rep;
  for (std::size_t k = 0; k + 1 < dist.size(); ++k)
    if (!(dist[k + 1] < dist[k] || (dist[k] == 0.0 && dist[k + 1] == 0.0))) rep.pass = false;
  if (!(dist.back() <= floor_value)) rep.pass = false;
  std::ostringstream os;
  os << report_head(cfg, "family");
  os << "  \"m\": " << m << ",\n";
  os << "  \"samples\": " << cfg.samples << ",\n";
  os << "  \"rejection_rate\": " << format_double(deficit) << ",\n";
  os << "  \"floor\": " << format_double(floor_value) << ",\n  \"rows\": [\n";
  std::ostringstream csv;
  csv << "t,distance,sigma\n";
  for (std::size_t k = 0; k < dist.size(); ++k) {
    os << "    {\"t\": " << format_double(cfg.schedule[k])
       << ", \"distance\": " << format_double(dist[k])
       << ", \"sigma\": " << format_double(sigma[k]) << "}" << (k + 1 < dist.size() ? "," : "")
       << "\n";
    csv << format_double(cfg.schedule[k]) << "," << format_double(dist[k]) << ","
        << format_double(sigma[k]) << "\n";
  }
  os << "  ],\n  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["family.csv"] = csv.str();
  return rep;
}

RunReport run_jump_demo(const ExperimentConfig& cfg) {
  if (!cfg.family) throw ConfigError("jump needs a \"family\"");
  require_m(cfg);
  const ConnectionFamily& fam = *cfg.family;
  if (!flat_u1_family(fam) || fam.base.manifold.dim != 1)
    throw ConfigError("jump runs on flat U(1) circle families");
  const Manifold& M = fam.base.manifold;
  const int m = cfg.m_schedule.front();
  const WindingEnsemble ens =
      sample_windings(M, cfg.base, m, cfg.samples, cfg.seed, cfg.sampler, cfg.workers);
  const std::vector<double> mass_c = class_masses(ens);
  const WindingTable table = winding_table(M);

  struct Row {
    double t, eps, mass, tail;
  };
  std::vector<Row> rows;
  std::vector<int> distinct;
  for (const double t : cfg.schedule) {
    const double p = member_form(fam, t).periods[0];
    for (const double eps : cfg.eps) {
      double mass = 0.0;
      for (std::size_t c = 0; c < mass_c.size(); ++c) {
        const double a = frac(ens.classes[c][0] * p);
        if (a > eps && a < 1.0 - eps) mass += mass_c[c];
      }
      double tail = 0.0;
      if (p != 0.0) {
        const long long tau = static_cast<long long>(std::floor(eps / std::abs(p)));
        for (std::size_t i = 0; i < table.atoms.size(); ++i)
          if (std::abs(table.atoms[i][0]) > tau) tail += table.weights[i];
      }
      rows.push_back({t, eps, mass, tail});
    }
  }
  // densification track: at the terminal (smallest) member the measure has
  // collapsed, yet the generated subgroup still fills the circle; count the
  // distinct angle cells reached by powers up to a growing cutoff
  const double p_term = member_form(fam, cfg.schedule.back()).periods[0];
  std::vector<int> cutoffs;
  for (int K = 1; K <= 8192; K *= 2) cutoffs.push_back(K);
  for (const int K : cutoffs) {
    std::vector<bool> cell(100, false);
    for (int nu = -K; nu <= K; ++nu) {
      int b = static_cast<int>(std::floor(frac(nu * p_term) / 0.01));
      if (b >= 100) b = 99;
      cell[b] = true;
    }
    distinct.push_back(static_cast<int>(std::count(cell.begin(), cell.end(), true)));
  }

  RunReport rep;
  const double n = static_cast<double>(cfg.samples);
  for (std::size_t e = 0; e < cfg.eps.size(); ++e) {
    double prev_mass = 2.0, prev_sig = 0.0;
    for (std::size_t k = 0; k < cfg.schedule.size(); ++k) {
      const Row& r = rows[k * cfg.eps.size() + e];
      const double sig = std::sqrt(std::max(r.mass * (1.0 - r.mass), 1e-12) / n);
      if (r.mass > prev_mass + 3.0 * (sig + prev_sig)) rep.pass = false;
      prev_mass = r.mass;
      prev_sig = sig;
    }
    const Row& last = rows[(cfg.schedule.size() - 1) * cfg.eps.size() + e];
    if (!(last.mass <= last.tail)) rep.pass = false;
  }
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k)
    if (distinct[k + 1] < distinct[k]) rep.pass = false;
  if (!(distinct.back() > distinct.front() && distinct.back() >= 99)) rep.pass = false;

  std::ostringstream os;
  os << report_head(cfg, "jump");
  os << "  \"m\": " << m << ",\n  \"samples\": " << cfg.samples << ",\n";
  os << "  \"rejection_rate\": " << format_double(ens.rejection.rate()) << ",\n";
  os << "  \"arc_mass\": [\n";
  std::ostringstream csv;
  csv << "t,arc_mass,eps,tail_bound\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "    {\"t\": " << format_double(rows[i].t) << ", \"eps\": " << format_double(rows[i].eps)
       << ", \"mass\": " << format_double(rows[i].mass)
       << ", \"tail_bound\": " << format_double(rows[i].tail) << "}"
       << (i + 1 < rows.size() ? "," : "") << "\n";
    csv << format_double(rows[i].t) << "," << format_double(rows[i].mass) << ","
        << format_double(rows[i].eps) << "," << format_double(rows[i].tail) << "\n";
  }
  os << "  ],\n  \"densification\": [\n";
  std::ostringstream csv2;
  csv2 << "power_cutoff,distinct_angles\n";
  for (std::size_t k = 0; k < distinct.size(); ++k) {
    os << "    {\"power_cutoff\": " << cutoffs[k] << ", \"distinct_angles\": "
       << distinct[k] << "}" << (k + 1 < distinct.size() ? "," : "") << "\n";
    csv2 << cutoffs[k] << "," << distinct[k] << "\n";
  }
  os << "  ],\n  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["jump.csv"] = csv.str();
  rep.files["densification.csv"] = csv2.str();
  return rep;
}

RunReport run_subgroup_criterion(const ExperimentConfig& cfg) {
  require_m(cfg);
  if (!cfg.connection && !cfg.family) throw ConfigError("subgroup needs a connection or family");
  if (cfg.subgroup_q < 1) throw ConfigError("subgroup_q must be >= 1");
  const double threshold = cfg.threshold > 0.0 ? cfg.threshold : 1e-9;
  std::vector<double> ts = cfg.family ? cfg.schedule : std::vector<double>{0.0};
  if (ts.empty()) ts = {0.0};

  struct Row {
    int m;
    double t, outside;
  };
  std::vector<Row> rows;
  RunReport rep;
  for (const int m : cfg.m_schedule) {
    const Manifold& M = cfg.family ? cfg.family->base.manifold : cfg.connection->manifold;
    const WindingEnsemble ens =
        sample_windings(M, cfg.base, m, cfg.samples,
                        cfg.seed ^ (static_cast<std::uint64_t>(m) * 0x9E3779B97F4A7C15ULL),
                        cfg.sampler, cfg.workers);
    for (const double t : ts) {
      const FlatU1Form F = cfg.family ? member_form(*cfg.family, t)
                                      : member_form(ConnectionFamily{*cfg.connection,
                                                                     MetricConnection::trivial(M),
                                                                     {}},
                                                    0.0);
      const HolonomyMeasure mu = winding_measure(ens, F);
      double outside = 0.0;
      for (const auto& a : mu.atoms) {
        double best = kTwoPi;
        for (int jj = 0; jj < cfg.subgroup_q; ++jj)
          best = std::min(best, arc01(a.h.angle, static_cast<double>(jj) / cfg.subgroup_q));
        if (best > cfg.merge_tol) outside += a.weight;
      }
      rows.push_back({m, t, outside});
      if (!(outside < threshold)) rep.pass = false;
    }
  }
  std::ostringstream os;
  os << report_head(cfg, "subgroup");
  os << "  \"subgroup_q\": " << cfg.subgroup_q << ",\n";
  os << "  \"merge_tol\": " << format_double(cfg.merge_tol) << ",\n";
  os << "  \"threshold\": " << format_double(threshold) << ",\n  \"rows\": [\n";
  std::ostringstream csv;
  csv << "m,t,outside_mass\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "    {\"m\": " << rows[i].m << ", \"t\": " << format_double(rows[i].t)
       << ", \"outside_mass\": " << format_double(rows[i].outside) << "}"
       << (i + 1 < rows.size() ? "," : "") << "\n";
    csv << rows[i].m << "," << format_double(rows[i].t) << "," << format_double(rows[i].outside)
        << "\n";
  }
  os << "  ],\n";
  os << "  \"note\": \""
     << (rep.pass ? "finite-sample support for containment; the test can refute containment "
                    "but cannot prove it"
                  : "mass persists outside H at the stated resolution, so the holonomy group "
                    "is not contained in H")
     << "\",\n";
  os << "  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["subgroup.csv"] = csv.str();
  return rep;
}

RunReport run_bs_detector(const ExperimentConfig& cfg) {
  if (!cfg.family) throw ConfigError("bs-detect needs a \"family\"");
  const ConnectionFamily& fam = *cfg.family;
  if (!flat_u1_family(fam)) throw ConfigError("bs-detect runs on flat U(1) families");
  if (cfg.schedule.size() < 3) throw ConfigError("bs-detect needs at least 3 schedule points");
  const double threshold = cfg.threshold > 0.0 ? cfg.threshold : 1e-9;
  const Manifold& M = fam.base.manifold;
  const std::size_t K = cfg.schedule.size();
  std::vector<std::vector<double>> mass(cfg.eps.size(), std::vector<double>(K, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    const HolonomyMeasure mu = analytic_flat_u1(M, member_form(fam, cfg.schedule[k]));
    for (std::size_t e = 0; e < cfg.eps.size(); ++e) mass[e][k] = arc_mass(mu, cfg.eps[e]);
  }
  RunReport rep;
  std::vector<double> limits(cfg.eps.size());
  for (std::size_t e = 0; e < cfg.eps.size(); ++e) {
    limits[e] = geometric_limit(mass[e][K - 3], mass[e][K - 2], mass[e][K - 1]);
    if (!(limits[e] < threshold)) rep.pass = false;
  }
  Eigen::VectorXd limit_periods(M.dim);
  for (int d = 0; d < M.dim; ++d) {
    const double v1 = member_form(fam, cfg.schedule[K - 3]).periods[d];
    const double v2 = member_form(fam, cfg.schedule[K - 2]).periods[d];
    const double v3 = member_form(fam, cfg.schedule[K - 1]).periods[d];
    limit_periods[d] = (std::abs(v2 - v1) < 1e-300)
                           ? v3
                           : ((v3 - v2) / (v2 - v1) > 0.0 && (v3 - v2) / (v2 - v1) < 0.95
                                  ? v3 + (v3 - v2) * ((v3 - v2) / (v2 - v1)) /
                                            (1.0 - (v3 - v2) / (v2 - v1))
                                  : v3);
  }
  std::ostringstream os;
  os << report_head(cfg, "bs-detect");
  os << "  \"threshold\": " << format_double(threshold) << ",\n";
  os << "  \"limit_periods\": [";
  for (int d = 0; d < M.dim; ++d)
    os << (d ? ", " : "") << format_double(limit_periods[d]);
  os << "],\n  \"extrapolated_mass\": [\n";
  std::ostringstream csv;
  csv << "t,arc_mass,eps\n";
  for (std::size_t e = 0; e < cfg.eps.size(); ++e) {
    os << "    {\"eps\": " << format_double(cfg.eps[e])
       << ", \"limit\": " << format_double(limits[e]) << "}"
       << (e + 1 < cfg.eps.size() ? "," : "") << "\n";
    for (std::size_t k = 0; k < K; ++k)
      csv << format_double(cfg.schedule[k]) << "," << format_double(mass[e][k]) << ","
          << format_double(cfg.eps[e]) << "\n";
  }
  os << "  ],\n  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["bs.csv"] = csv.str();
  return rep;
}

RunReport run_stokes_suite(const ExperimentConfig& cfg) {
  if (!cfg.connection) throw ConfigError("stokes needs a \"connection\"");
  const MetricConnection& C = *cfg.connection;
  if (!C.is_u1() || !C.manifold.flat())
    throw ConfigError("stokes runs on U(1) connections over flat members");
  const Manifold& M = C.manifold;
  const int m = cfg.m_schedule.empty() ? 16 : cfg.m_schedule.front();
  const double rv = rho(M);
  const double sd = rv / 4.0;
  double worst = 0.0;
  std::ostringstream csv;
  csv << "loop_index,residual\n";
  for (int idx = 0; idx < cfg.loops; ++idx) {
    RngStream rng(cfg.seed ^ 0x570CE5ULL, static_cast<std::uint64_t>(idx));
    LoopVertices v;
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000) throw ProposalFailure("stokes loop generation failed");
      Eigen::VectorXd u(M.dim);
      for (int d = 0; d < M.dim; ++d) u[d] = rng.uniform();
      v = LoopVertices{};
      v.base = reduce_point(M, M.basis * u);
      v.m = m;
      Point z = Point::Zero(M.dim);
      for (int i = 0; i < m - 1; ++i) {
        const int remaining = m - i;
        const double s = sd * std::sqrt((remaining - 1.0) / remaining);
        Point mean = z * (remaining - 1.0) / remaining;
        for (int d = 0; d < M.dim; ++d) mean[d] += s * rng.normal();
        z = mean;
        v.vertices.push_back(reduce_point(M, v.base + z));
      }
      if (admissible(M, v, rv)) break;
    }
    const double r = stokes_check(C, build_loop(M, v));
    worst = std::max(worst, r);
    csv << idx << "," << format_double(r) << "\n";
  }
  const double threshold =
      cfg.threshold > 0.0 ? cfg.threshold : (C.type == ConnectionType::SinForm ? 1e-6 : 1e-12);
  RunReport rep;
  rep.pass = worst < threshold;
  std::ostringstream os;
  os << report_head(cfg, "stokes");
  os << "  \"loops\": " << cfg.loops << ",\n";
  os << "  \"m\": " << m << ",\n";
  os << "  \"max_residual\": " << format_double(worst) << ",\n";
  os << "  \"threshold\": " << format_double(threshold) << ",\n";
  os << "  \"verdict\": \"" << (rep.pass ? "PASS" : "FAIL") << "\"\n}\n";
  rep.report_json = os.str();
  rep.files["stokes.csv"] = csv.str();
  return rep;
}

RunReport run_selftest() {
  std::ostringstream os;
  bool pass = true;
  auto check = [&](const std::string& name, bool ok) {
    pass = pass && ok;
    os << (ok ? "ok " : "FAIL ") << name << "\n";
  };

  const Manifold circle = Manifold::circle(1.0);
  const WindingTable T = winding_table(circle);
  double w0 = 0.0, w1 = 0.0;
  for (std::size_t i = 0; i < T.atoms.size(); ++i) {
    if (T.atoms[i][0] == 0) w0 = T.weights[i];
    if (T.atoms[i][0] == 1) w1 = T.weights[i];
  }
  check("winding weights", std::abs(w0 - 0.28210) < 2e-4 && std::abs(w1 - 0.21970) < 2e-4);

  Eigen::VectorXd zero(1);
  zero << 0.0;
  const HolonomyMeasure d0 = analytic_flat_u1(circle, FlatU1Form{zero, 0.0});
  check("trivial analytic measure", d0.atoms.size() == 1 && std::abs(d0.atoms[0].weight - 1.0) < 1e-12);

  const HolonomyMeasure a = empirical_measure({{u1_element(0.0), 1.0}});
  const HolonomyMeasure b = empirical_measure({{u1_element(0.5), 1.0}});
  check("circle W1 antipodal", std::abs(bl_distance(a, b) - 3.14159265358979324) < 1e-12);

  MetricConnection C = MetricConnection::flat_u1(circle, (Eigen::VectorXd(1) << 0.3).finished());
  LoopVertices v;
  v.base = zero;
  v.m = 8;
  for (int i = 1; i < 8; ++i)
    v.vertices.push_back(reduce_point(circle, (Eigen::VectorXd(1) << i / 8.0).finished()));
  const HolonomyElement h = holonomy_u1_exact(C, build_loop(circle, v));
  check("flat holonomy winding 1", std::abs(h.angle - 0.3) < 1e-12);

  const Manifold t2 = Manifold::flat_torus(Eigen::Matrix2d::Identity());
  MetricConnection S = MetricConnection::sin_form(t2, 1.0);
  LoopVertices sq;
  sq.base = Point::Zero(2);
  sq.m = 8;
  const double side = 0.2;
  const double path[7][2] = {{0.5, 0.0}, {1.0, 0.0}, {1.0, 0.5}, {1.0, 1.0},
                             {0.5, 1.0}, {0.0, 1.0}, {0.0, 0.5}};
  for (const auto& p : path)
    sq.vertices.push_back(reduce_point(t2, (Eigen::Vector2d(p[0], p[1]) * side).eval()));
  check("stokes sin form", stokes_check(S, build_loop(t2, sq)) < 1e-6);

  check("sphere heat kernel diagonal",
        std::abs(heat_kernel(Manifold::sphere2(), 1.0,
                             (Eigen::Vector3d() << 0, 0, 1).finished(),
                             (Eigen::Vector3d() << 0, 0, 1).finished()) -
                 0.112876) < 1e-5);

  RunReport rep;
  rep.pass = pass;
  os << (pass ? "selftest PASS" : "selftest FAIL") << "\n";
  rep.report_json = os.str();
  return rep;
}

// --- CLI --------------------------------------------------------------------

namespace {

struct CliShared {
  std::string config, out, transport, sampler;
  std::uint64_t seed = 0;
  int workers = 0, steps = -1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* transport_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void attach_shared(CLI::App* sc, CliShared& sh, bool config_required) {
  auto* c = sc->add_option("--config", sh.config, "JSON experiment config");
  if (config_required) c->required();
  sh.seed_opt = sc->add_option("--seed", sh.seed, "RNG seed (overrides config)");
  sh.out_opt = sc->add_option("--out", sh.out, "output directory");
  sh.workers_opt = sc->add_option("--workers", sh.workers, "sampling worker threads");
  sh.transport_opt =
      sc->add_option("--transport", sh.transport, "transport route: auto|ode|exact-u1|ito");
  sh.steps_opt = sc->add_option("--steps-per-segment", sh.steps, "RK4 steps per segment");
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Monte Carlo holonomy measures on catalog manifolds"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"dist", "sample one holonomy measure"},
      {"refine", "partition refinement study"},
      {"family", "connection family convergence"},
      {"jump", "group densification vs measure collapse demo"},
      {"subgroup", "subgroup containment test"},
      {"bs-detect", "Bohr-Sommerfeld detector"},
      {"stokes", "curvature/holonomy Stokes residuals"},
      {"selftest", "run built-in closed-form checks"},
  };
  std::map<std::string, CliShared> shared;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, desc] : cmds) {
    CLI::App* sc = app.add_subcommand(name, desc);
    attach_shared(sc, shared[name], name != "selftest");
    subs[name] = sc;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  const CliShared& sh = shared[cmd];
  try {
    RunReport rep;
    std::string out_dir = ".";
    if (cmd == "selftest") {
      rep = run_selftest();
      std::cout << rep.report_json;
      return rep.pass ? 0 : 2;
    }
    ExperimentConfig cfg = load_config(sh.config);
    if (sh.seed_opt->count()) {
      cfg.seed = sh.seed;
      cfg.has_seed = true;
    }
    if (!cfg.has_seed) {
      std::cerr << "error: no seed given; set \"seed\" in the config or pass --seed "
                   "(runs must be reproducible)\n";
      return 1;
    }
    if (sh.workers_opt->count()) cfg.workers = sh.workers;
    if (sh.transport_opt->count()) cfg.transport = sh.transport;
    if (sh.steps_opt->count()) cfg.steps_per_segment = sh.steps;
    if (sh.out_opt->count()) cfg.out_dir = sh.out;
    if (!cfg.out_dir.empty()) out_dir = cfg.out_dir;

    if (cmd == "dist") rep = run_distribution(cfg);
    else if (cmd == "refine") rep = run_refinement(cfg);
    else if (cmd == "family") rep = run_family_convergence(cfg);
    else if (cmd == "jump") rep = run_jump_demo(cfg);
    else if (cmd == "subgroup") rep = run_subgroup_criterion(cfg);
    else if (cmd == "bs-detect") rep = run_bs_detector(cfg);
    else if (cmd == "stokes") rep = run_stokes_suite(cfg);

    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", rep.report_json);
    for (const auto& [name, content] : rep.files) write_text_file(out_dir + "/" + name, content);
    std::cout << cmd << ": " << (rep.pass ? "PASS" : "FAIL") << " (report in " << out_dir
              << ")\n";
    return rep.pass ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace holomc
