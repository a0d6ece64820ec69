#pragma once

// Ionization detection chain: forward model of detected counts and the
// inversion of a phase scan to magnetization.
//
//   M_up(phi) = eta (N_up(phi) + leak N_down(phi) + N_a)
//   M_tot     = eta (N_tot + N_a),   N_a(t) = aux_rate * t * N_tot
//
// Inversion works in detected units, so eta cancels from every ratio.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "xxz/observables.hpp"
#include "xxz/rng.hpp"

namespace xxz {

enum class CountingNoise { Poissonian, None };

struct DetectionModel {
  double eta = 0.173;
  double aux_rate = 0.007;  // 1/us (7 kHz)
  CountingNoise noise = CountingNoise::Poissonian;
  double leakage = 0.0;     // fraction of down atoms surviving the depump

  void validate() const;
};

struct CountSample {
  double m_up = 0.0;
  double m_total = 0.0;
};

// Counts for known populations at time t. rng may be null only when the
// model is noiseless.
CountSample simulate_counts(double n_up, double n_down, double t, const DetectionModel& model, Rng* rng);

// As above with an explicit auxiliary population.
CountSample simulate_counts_with_aux(double n_up, double n_down, double n_aux, const DetectionModel& model,
                                     Rng* rng);

struct PhaseScan {
  double t = 0.0;              // us
  std::vector<double> phases;  // rad
  std::vector<double> m_up;
  std::vector<double> m_total;
  // Ground truth when forward-simulated.
  std::optional<double> true_sx, true_sy, true_n_total, true_n_aux;
};

// Default grid: 8 equally spaced phases over [0, 2 pi).
std::vector<double> default_phases(std::size_t count = 8);

// Forward model of a full scan for a state with in-plane magnetization
// (sx, sy): N_up(phi) = N_tot (1/2 + sx cos(phi) + sy sin(phi)).
PhaseScan simulate_phase_scan(double sx, double sy, double n_total, double t, const std::vector<double>& phases,
                              const DetectionModel& model, std::uint64_t seed);

struct SinusoidFit {
  double mean = 0.0;       // M_bar
  double amplitude = 0.0;  // A >= 0
  double phase = 0.0;      // phi_0 in (-pi, pi]
  // Covariance of the linear coefficients (M_bar, A cos phi_0, A sin phi_0).
  double cov[3][3] = {};
  double residual_norm = 0.0;
};

// Least squares M_bar + A cos(phi - phi_0). With poisson_weights the weights
// are 1/max(model, 1), iterated from the observed counts, and the covariance
// is absolute; otherwise it is scaled by the residual variance. Throws
// FitDegenerate.
SinusoidFit sinusoidal_fit(const PhaseScan& scan, bool poisson_weights = true);

struct Reconstruction {
  std::vector<double> s_phi;  // per scan phase
  double sx = 0.0;            // from the fitted quadratures
  double sy = 0.0;
  double planar = 0.0;        // A / N_tot
  double planar_err = 0.0;
  double n_total = 0.0;       // divided by eta
  double n_aux = 0.0;         // divided by eta
  bool out_of_range = false;  // some |S_phi| above 1/2 + 3 sigma
};

// Throws NonPhysical if the inferred N_tot <= 0 or N_a < -aux_tolerance
// (detected units; default 5 Poisson sigma of M_bar).
Reconstruction reconstruct_magnetization(const PhaseScan& scan, double eta = 1.0,
                                         std::optional<double> aux_tolerance = std::nullopt,
                                         bool poisson_weights = true);

struct ReadoutSeries {
  ObservableSeries curve;    // Sz columns zero
  std::vector<double> n_aux; // inferred, per time
  std::vector<PhaseScan> scans;
};

// Passes each time point of a curve through the detection chain and back.
ReadoutSeries simulate_readout(const ObservableSeries& truth, double n_total, const DetectionModel& model,
                               const std::vector<double>& phases, std::uint64_t seed);

void write_phase_scans(std::ostream& os, const std::vector<PhaseScan>& scans);
std::vector<PhaseScan> read_phase_scans(std::istream& is);

}  // namespace xxz
