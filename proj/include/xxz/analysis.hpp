#pragma once

// Relaxation analysis: stretched-exponential fits, rescaling collapse,
// fluctuator-model predictions and early-time diagnostics.
//
// Rates and inverse times are angular (rad/us): a coupling J in MHz (nu)
// corresponds to the rate 2 pi J.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "xxz/disorder.hpp"
#include "xxz/observables.hpp"

namespace xxz {

struct FitOptions {
  // Early-time exclusion t >= 1 / (2 pi J_max) when J_max > 0.
  bool exclude_early = true;
  std::optional<double> t_min;  // us; overrides the exclusion rule
  std::optional<double> t_max;  // us; overrides the noise-floor rule
  double floor = 0.02;          // t_max = last time with Sx above this
  bool free_amplitude = false;
  bool use_weights = true;      // inverse variances from Sx_err when all > 0
  std::vector<double> beta_starts{0.2, 0.35, 0.5, 1.0};
  unsigned max_iterations = 500;
};

struct FitResult {
  double gamma = 0.0;      // 1/us
  double beta = 0.0;
  double amplitude = 0.5;  // fixed at 1/2 unless free_amplitude
  // Covariance of (gamma, beta, amplitude); amplitude row zero when fixed.
  double cov[3][3] = {};
  double t_min = 0.0;
  double t_max = 0.0;
  std::size_t points = 0;
  double residual_norm = 0.0;
  bool fixed_amplitude = true;

  double gamma_err() const;
  double beta_err() const;
  double evaluate(double t) const;
};

// Fits A exp(-(gamma t)^beta) to Sx. j_max in MHz (nu); 0 disables the
// exclusion rule. Throws WindowTooSmall or NonConvergence.
FitResult fit_stretched_exponential(const ObservableSeries& curve, double j_max, const FitOptions& options = {});

struct CollapseOptions {
  std::size_t grid_points = 64;
};

struct CollapseReport {
  std::vector<double> scales;  // MHz (nu)
  std::vector<double> grid;    // dimensionless 2 pi * scale * t
  std::vector<std::vector<double>> values;  // [curve][grid]
  std::vector<double> spread;  // population std across curves per grid point
  double dispersion = 0.0;     // max of spread
};

// Rescales each curve's time axis by 2 pi * scale and compares Sx on a
// shared log-spaced grid over the common support. Throws NoOverlap.
CollapseReport rescale_collapse(const std::vector<ObservableSeries>& curves, const std::vector<double>& scales,
                                const CollapseOptions& options = {});

enum class FluctuatorMode { Quadrature, MonteCarlo };

struct FluctuatorOptions {
  FluctuatorMode mode = FluctuatorMode::Quadrature;
  std::size_t samples = 10000;  // Monte Carlo rates
  std::uint64_t seed = 1;
  bool fit_curve = true;
  FitOptions fit = [] {
    FitOptions f;
    f.exclude_early = false;
    return f;
  }();
};

struct FluctuatorResult {
  ObservableSeries curve;
  std::optional<FitResult> fit;  // present when fit_curve
};

// <Sx>(t) = 1/2 int g(J) exp(-2 pi J t) dJ, then fitted.
FluctuatorResult fluctuator_model(const CouplingDistribution& g, const std::vector<double>& times,
                                  const FluctuatorOptions& options = {});

struct EarlyTimeReport {
  double linear = 0.0;     // b in 1/2 - b t - c t^2
  double quadratic = 0.0;  // c
  double linear_err = 0.0;
  double quadratic_err = 0.0;
  double t_edge = 0.0;
  double linear_ratio = 0.0;  // |b| t_edge / (c t_edge^2)
  std::size_t points = 0;
  bool quadratic_onset = false;  // c > 0 and linear_ratio < 0.1
};

// Fit on the points with 0 < t < 0.2 / (2 pi J_max). Throws WindowTooSmall
// with fewer than 4 such points.
EarlyTimeReport early_time_check(const ObservableSeries& curve, double j_max);

void write_fit(std::ostream& os, const FitResult& fit);
void write_collapse(std::ostream& os, const CollapseReport& report);

}  // namespace xxz
