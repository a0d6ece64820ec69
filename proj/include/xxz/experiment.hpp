#pragma once

// Declarative experiments: configuration loading, per-realization execution,
// disorder averaging, analysis and persistence.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xxz/analysis.hpp"
#include "xxz/couplings.hpp"
#include "xxz/disorder.hpp"
#include "xxz/observables.hpp"
#include "xxz/protocol.hpp"
#include "xxz/quantum.hpp"
#include "xxz/semiclassical.hpp"

namespace xxz {

enum class Method { Exact, DTWA, MeanField, MACE, EmchRadin, Fluctuator };

std::string to_string(Method m);
Method parse_method(const std::string& name);

enum class TimeUnit {
  Microsecond,
  // Dimensionless tau = 2 pi (C6 / a^6) t with a the Wigner-Seitz radius of
  // the configured density.
  WignerSeitz,
};

struct TimeGrid {
  TimeUnit unit = TimeUnit::Microsecond;
  double start = 0.0;
  double stop = 10.0;
  std::size_t points = 101;
  bool log_spaced = false;
};

enum class CollapseScale { ATilde, A };

struct ExperimentConfig {
  std::string name = "experiment";
  CloudGeometry geometry;
  double excitation_probability = 0.05;  // peak single-atom probability (cloud only)
  XXZParameters xxz;
  Method method = Method::DTWA;
  // Experiments simulate both pulses unless the config asks for ideal rotations.
  RamseyProtocol protocol = [] {
    RamseyProtocol p;
    p.include_pulses = true;
    return p;
  }();
  TimeGrid times;
  std::size_t n_realizations = 1;
  std::size_t n_traj = 100;
  std::size_t block_size = 16;
  std::uint64_t seed = 1;
  std::optional<unsigned> workers;
  IntegratorOptions integrator;
  KrylovOptions krylov;
  unsigned mace_cluster = 6;
  Provenance fluctuator_provenance = Provenance::NearestNeighbor;
  FluctuatorMode fluctuator_mode = FluctuatorMode::Quadrature;
  std::size_t fluctuator_samples = 10000;
  bool fit = true;
  FitOptions fit_options;
  CollapseScale collapse_scale = CollapseScale::ATilde;
  std::string output_dir;

  // Box geometries given as (count, density) without edges become a cube of
  // edge (count / density)^(1/3) holding exactly `count` spins.
  CloudGeometry resolved_geometry() const;
  // Enforces method-specific limits (Exact/MACE cap, n_traj >= 1, ...).
  void validate() const;
  // Output times in us.
  std::vector<double> time_points() const;
  // C6 / a^6 for the configured density, MHz (nu); 0 when undefined.
  double wigner_seitz_scale() const;
};

// Throws Error(ConfigError) on malformed input or unit errors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
// Canonical JSON with sorted keys; hashing it is stable under reordering.
std::string canonical_config(const std::string& json_text);
std::uint64_t fnv1a64(const std::string& bytes);

struct RealizationFailure {
  std::size_t index = 0;
  std::string code;
  std::string message;
};

struct RunManifest {
  std::string config_hash;  // hex FNV-1a 64 of the canonical config
  std::string software_version;
  std::vector<std::uint64_t> seeds;  // per realization
  std::vector<RealizationFailure> failures;
  std::vector<std::string> files;   // relative to the output directory
  double wall_time_s = 0.0;
  std::size_t n_traj = 0;
  double rtol = 0.0;
  double atol = 0.0;
  std::string method;
  std::string protocol;
};

struct EnsembleScales {
  double density = 0.0;     // um^-3, mean realized
  double a = 0.0;           // Wigner-Seitz radius of the mean density, um
  double j_ws = 0.0;        // C6 / a^6, MHz
  double j_mf = 0.0;        // mean over realizations of the median mean-field coupling
  double a_tilde = 0.0;     // (C6 / j_mf)^(1/6)
  double j_max = 0.0;       // early-time cutoff coupling used in fits, MHz
  double mean_count = 0.0;  // spins per realization
};

struct ConservationReport {
  double spin_norm_drift = 0.0;
  double energy_drift = 0.0;
  double quantum_norm_drift = 0.0;
  double quantum_sz_drift = 0.0;
  double quantum_energy_drift = 0.0;
};

struct ExperimentResult {
  ObservableSeries curve;  // disorder average
  std::vector<ObservableSeries> realizations;  // successful ones, index order
  std::optional<FitResult> fit;
  std::optional<std::string> fit_error;
  EnsembleScales scales;
  ConservationReport conservation;
  RunManifest manifest;
};

std::uint64_t realization_seed(const ExperimentConfig& config, std::size_t r);
// The spin configuration used by realization r of run_experiment.
SpinConfiguration sample_realization(const ExperimentConfig& config, std::size_t r);

// Runs every realization (errors are isolated per realization and reported
// in the manifest), averages, fits and, when output_dir is set, persists
// curve.dat, fit.txt, scales.txt, curve.svg, realizations/ and manifest.json.
// Throws NonConvergence if every realization fails.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SweepRow {
  double density = 0.0;  // um^-3
  EnsembleScales scales;
  double disorder = 0.0;  // (a_tilde / R_bl)^-3
  std::optional<FitResult> fit;
};

struct SweepResult {
  std::vector<ExperimentResult> runs;
  std::vector<SweepRow> rows;
  std::optional<CollapseReport> collapse;        // scale per config.collapse_scale
  std::optional<CollapseReport> collapse_naive;  // C6 / a^6
  std::string notice;
};

// One run per density (output in <output_dir>/rho_<k>), then beta table and
// collapse. A single density skips the collapse with a notice.
SweepResult sweep_density(const ExperimentConfig& base, const std::vector<double>& densities);

std::string software_version();

}  // namespace xxz
