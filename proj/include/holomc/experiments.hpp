#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "holomc/jsonio.hpp"
#include "holomc/measure.hpp"

namespace holomc {

struct ExperimentConfig {
  Manifold manifold;
  std::optional<MetricConnection> connection;
  std::optional<ConnectionFamily> family;
  std::vector<double> schedule;  // family parameters t_k, decreasing
  Point base;
  std::vector<int> m_schedule;  // powers of two; single-m runs use front()
  long long samples = 0;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string sampler = "exact";    // exact | is
  std::string transport = "auto";   // auto | ode | exact-u1 | ito
  int steps_per_segment = 0;        // 0 = per-segment default
  int ito_substeps = 4;
  std::vector<double> eps = {0.05, 0.1};
  double merge_tol = 0.01;
  double threshold = 1e-9;
  int subgroup_q = 1;  // H = q-th roots of unity
  int loops = 100;     // stokes suite size
  int workers = 1;
  std::string out_dir;
  std::uint64_t config_hash = 0;
};

ExperimentConfig load_config(const std::string& path);

struct Ensemble {
  std::vector<LoopVertices> loops;
  RejectionCounter rejection;
};

/// Compact loop ensemble for flat U(1) work: only the homotopy class of each
/// admissible loop is kept (the holonomy depends on nothing else), so large
/// runs at fine partitions stay small in memory.
struct WindingEnsemble {
  std::vector<Eigen::VectorXi> classes;  // distinct classes, first-appearance order
  std::vector<int> class_of;             // per sample index
  std::vector<double> weights;           // per sample index (1 for the exact sampler)
  RejectionCounter rejection;
};

WindingEnsemble sample_windings(const Manifold& M, const Point& x, int m, long long n,
                                std::uint64_t seed, const std::string& sampler, int workers);

/// Normalized per-class masses of the ensemble.
std::vector<double> class_masses(const WindingEnsemble& ens);

/// The flat U(1) pipeline measure: class masses pushed to angles theta . nu.
HolonomyMeasure winding_measure(const WindingEnsemble& ens, const FlatU1Form& F);

/// N admissible loops with per-index RNG streams; the result does not depend
/// on the worker count.
Ensemble sample_ensemble(const Manifold& M, const Point& x, int m, long long n,
                         std::uint64_t seed, const std::string& sampler, int workers);

/// Transport every ensemble loop under C; atoms in index order.
HolonomyMeasure transported_measure(const MetricConnection& C, const Ensemble& ens,
                                    const std::string& transport, int steps_per_segment,
                                    int ito_substeps, std::uint64_t seed, int workers);

/// Stddev of bl_distance(resample(mu), ref) over multinomial resamples.
double bootstrap_sigma(const HolonomyMeasure& mu, const HolonomyMeasure& ref, int resamples,
                       std::uint64_t seed);

struct RunReport {
  bool pass = true;
  std::string report_json;
  std::map<std::string, std::string> files;  // name -> content, written by the CLI
};

RunReport run_distribution(const ExperimentConfig& cfg);
RunReport run_refinement(const ExperimentConfig& cfg);
RunReport run_family_convergence(const ExperimentConfig& cfg);
RunReport run_jump_demo(const ExperimentConfig& cfg);
RunReport run_subgroup_criterion(const ExperimentConfig& cfg);
RunReport run_bs_detector(const ExperimentConfig& cfg);
RunReport run_stokes_suite(const ExperimentConfig& cfg);
RunReport run_selftest();

int cli_main(int argc, char** argv);

}  // namespace holomc
