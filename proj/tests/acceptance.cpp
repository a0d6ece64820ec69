// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Every tolerance is pinned below.
//
// Dimensionless time throughout is tau = 2 pi J t for the stated coupling J
// in MHz, i.e. time measured against the angular coupling.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xxz/analysis.hpp"
#include "xxz/curve_io.hpp"
#include "xxz/disorder.hpp"
#include "xxz/error.hpp"
#include "xxz/experiment.hpp"
#include "xxz/readout.hpp"
#include "xxz/units.hpp"

using namespace xxz;
namespace fs = std::filesystem;

namespace {

namespace tol {
constexpr double kPairOracle = 1e-10;          // 1: max |dSx| exact vs dense
constexpr double kRelaxedSx = 0.1;             // 2: Sx below this ...
constexpr double kRelaxTau = 50.0;             // 2: ... by tau_mf = 50
constexpr double kEntropyLevel = 0.8;          // 2: mean Renyi entropy above this
constexpr double kEntropyScaleRatio = 3.0;     // 2: crossing times within this factor
constexpr double kDtwaExact = 0.05;            // 3: |Sx_dtwa - Sx_exact| for tau_mf <= 10
constexpr double kDtwaTau = 10.0;
constexpr double kMeanFieldIdeal = 1e-10;      // 4: |Sx - 1/2| without pulses
constexpr double kMeanFieldPulsed = 0.05;      // 4: relaxation over 10 us with pulses
constexpr double kBetaTarget = 0.36;           // 5
constexpr double kBetaWindow = 0.06;
constexpr double kBetaSpread = 0.06;
constexpr double kCollapse = 0.03;             // 6: dispersion of the three dilute curves
constexpr double kBreakdownFactor = 2.0;       // 6: growth when the dense curve joins
constexpr double kIsingSigmas = 3.0;           // 7: dTWA vs closed form, in standard errors
constexpr double kIsingBeta = 0.5;
constexpr double kIsingBetaWindow = 0.05;
constexpr double kFluctuatorBetaFloor = 0.5;   // 8
constexpr double kFluctuatorBetaSpread = 0.05;
constexpr double kReadoutRoundTrip = 1e-12;    // 9
constexpr double kReadoutCoverage = 0.90;
constexpr double kSpinNorm = 1e-8;             // 10
constexpr double kClassicalEnergy = 1e-8;
constexpr double kQuantumSz = 1e-10;
constexpr double kQuantumNorm = 1e-10;
constexpr double kDeterminism = 1e-13;         // 11
}  // namespace tol


struct Outcome {
  int id;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Outcome> g_outcomes;
ConservationReport g_conservation;
fs::path g_out = "acceptance_runs";

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void record(int id, bool pass, const std::string& detail, double seconds) {
  g_outcomes.push_back({id, pass, detail, seconds});
  std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
}

// budget_s > 0 makes the wall-clock limit part of the criterion.
void run_criterion(int id, double budget_s, const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::pair<bool, std::string> r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("error: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && s > budget_s) {
    r.first = false;
    r.second += fmt("; runtime over the %.0f s budget", budget_s);
  }
  record(id, r.first, r.second, s);
}

void absorb(const ConservationReport& c) {
  g_conservation.spin_norm_drift = std::max(g_conservation.spin_norm_drift, c.spin_norm_drift);
  g_conservation.energy_drift = std::max(g_conservation.energy_drift, c.energy_drift);
  g_conservation.quantum_norm_drift = std::max(g_conservation.quantum_norm_drift, c.quantum_norm_drift);
  g_conservation.quantum_sz_drift = std::max(g_conservation.quantum_sz_drift, c.quantum_sz_drift);
  g_conservation.quantum_energy_drift = std::max(g_conservation.quantum_energy_drift, c.quantum_energy_drift);
}

ExperimentResult run(ExperimentConfig cfg, const std::string& name) {
  cfg.name = name;
  cfg.output_dir = (g_out / name).string();
  ExperimentResult r = run_experiment(cfg);
  absorb(r.conservation);
  if (!r.manifest.failures.empty()) {
    throw Error(ErrorCode::NonConvergence, name + ": " + std::to_string(r.manifest.failures.size()) +
                                               " realizations failed, first: " + r.manifest.failures[0].message);
  }
  return r;
}

std::string curve_text(const ObservableSeries& c) {
  std::ostringstream os;
  write_curve(os, c);
  return os.str();
}

double max_curve_diff(const ObservableSeries& a, const ObservableSeries& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  auto cmp = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t k = 0; k < x.size(); ++k) m = std::max(m, std::abs(x[k] - y[k]));
  };
  cmp(a.times, b.times);
  cmp(a.sx, b.sx);
  cmp(a.sy, b.sy);
  cmp(a.sz, b.sz);
  cmp(a.sx_err, b.sx_err);
  cmp(a.sy_err, b.sy_err);
  cmp(a.sz_err, b.sz_err);
  return m;
}

// Closed-form pair evolution from a 4x4 Jacobi eigendecomposition.
struct PairOracle {
  double h[4][4] = {};
  double v[4][4] = {};
  double e[4] = {};

  PairOracle(double j_angular, double delta) {
    const double zz = j_angular * delta / 4.0;
    h[0][0] = h[3][3] = zz;
    h[1][1] = h[2][2] = -zz;
    h[1][2] = h[2][1] = j_angular / 2.0;
    double a[4][4];
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) {
        a[i][k] = h[i][k];
        v[i][k] = i == k ? 1.0 : 0.0;
      }
    for (int sweep = 0; sweep < 50; ++sweep) {
      double off = 0.0;
      for (int p = 0; p < 4; ++p)
        for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
      if (off < 1e-30) break;
      for (int p = 0; p < 4; ++p) {
        for (int q = p + 1; q < 4; ++q) {
          if (a[p][q] == 0.0) continue;
          const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
          const double c = std::cos(theta), s = std::sin(theta);
          for (int k = 0; k < 4; ++k) {
            const double akp = a[k][p], akq = a[k][q];
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
          }
          for (int k = 0; k < 4; ++k) {
            const double apk = a[p][k], aqk = a[q][k];
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
          }
          for (int k = 0; k < 4; ++k) {
            const double vkp = v[k][p], vkq = v[k][q];
            v[k][p] = c * vkp - s * vkq;
            v[k][q] = s * vkp + c * vkq;
          }
        }
      }
    }
    for (int i = 0; i < 4; ++i) e[i] = a[i][i];
  }

  // <Sx> of spin 0 for |+x +x> evolved for t; basis (uu, ud, du, dd) with
  // the first label for spin 0.
  double sx(double t) const {
    using C = std::complex<double>;
    const C psi0[4] = {0.5, 0.5, 0.5, 0.5};
    C psi[4] = {};
    for (int m = 0; m < 4; ++m) {
      C overlap = 0.0;
      for (int k = 0; k < 4; ++k) overlap += v[k][m] * psi0[k];
      const C phase = std::exp(C(0.0, -e[m] * t));
      for (int k = 0; k < 4; ++k) psi[k] += v[k][m] * phase * overlap;
    }
    // Sx on spin 0 flips the first label: uu<->du, ud<->dd.
    const C val = std::conj(psi[0]) * psi[2] + std::conj(psi[2]) * psi[0] + std::conj(psi[1]) * psi[3] +
                  std::conj(psi[3]) * psi[1];
    return 0.5 * val.real();
  }
};

// Shared small-ensemble setup for criteria 2, 3 and 11.
struct SmallEnsemble {
  ExperimentConfig cfg;
  double j_mf = 0.0;  // MHz, mean over realizations of the median mean-field coupling
};

SmallEnsemble small_ensemble() {
  SmallEnsemble s;
  ExperimentConfig& c = s.cfg;
  c.geometry.kind = GeometryKind::UniformBox;
  c.geometry.periodic = true;
  c.geometry.count = 12;
  c.geometry.peak_density = 3.51e8 * kPerCubicCm;
  c.geometry.blockade_radius = 5.0;
  c.protocol.include_pulses = false;
  c.n_realizations = 200;
  c.seed = 2002;
  c.workers = 8;
  c.fit = false;
  for (std::size_t r = 0; r < c.n_realizations; ++r) {
    s.j_mf += build_coupling_matrix(sample_realization(c, r), c.xxz).j_mf_median();
  }
  s.j_mf /= static_cast<double>(c.n_realizations);
  return s;
}

TimeGrid tau_grid(double tau_max, std::size_t points, double j, double tau_min = 0.0) {
  TimeGrid g;
  g.unit = TimeUnit::Microsecond;
  g.log_spaced = tau_min > 0.0;
  g.start = tau_min / angular(j);
  g.stop = tau_max / angular(j);
  g.points = points;
  return g;
}

double first_crossing(const std::vector<double>& tau, const std::vector<double>& y, double level, bool below) {
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (below ? y[k] < level : y[k] > level) return tau[k];
  }
  return INFINITY;
}

ExperimentConfig preset(const std::string& name) {
  return load_config((fs::path(XXZ_PRESET_DIR) / (name + ".json")).string());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_out = argv[1];
  fs::create_directories(g_out);
  std::printf("acceptance: outputs under %s, version %s\n", g_out.string().c_str(),
              software_version().c_str());

  // 1. Exact evolution of a pair against the dense eigendecomposition.
  run_criterion(1, 1.0, [] {
    const double j = 1.55, delta = -0.73;
    const CouplingMatrix c(2, {0.0, j, j, 0.0}, delta);
    const PairOracle oracle(angular(j), delta);
    std::vector<double> times;
    for (int k = 0; k <= 400; ++k) times.push_back(20.0 / angular(j) * k / 400.0);
    ExactDiagnostics d;
    const ObservableSeries s = run_exact(c, RamseyProtocol{}, times, {}, &d);
    absorb({0.0, 0.0, d.max_norm_drift, d.max_sz_drift, d.max_energy_drift});
    double err = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) err = std::max(err, std::abs(s.sx[k] - oracle.sx(times[k])));
    return std::pair{err < tol::kPairOracle, fmt("max |dSx| = %.2e over tau_J in [0, 20]", err)};
  });

  SmallEnsemble small;
  ObservableSeries exact_curve;
  std::vector<double> exact_tau;

  // 2. Exact relaxation and entropy growth for N = 12.
  run_criterion(2, 1200.0, [&] {
    small = small_ensemble();
    ExperimentConfig c = small.cfg;
    c.method = Method::Exact;
    c.times = tau_grid(100.0, 201, small.j_mf);
    const ExperimentResult r = run(c, "c2_exact_n12");
    exact_curve = r.curve;
    for (double t : r.curve.times) exact_tau.push_back(angular(small.j_mf) * t);
    const double t_sx = first_crossing(exact_tau, r.curve.sx, tol::kRelaxedSx, true);
    const double t_s = first_crossing(exact_tau, r.curve.entropy, tol::kEntropyLevel, false);
    const bool comparable = std::isfinite(t_s) && t_s / t_sx < tol::kEntropyScaleRatio &&
                            t_sx / t_s < tol::kEntropyScaleRatio;
    const bool ok = t_sx <= tol::kRelaxTau && comparable;
    return std::pair{ok, fmt("N=12, 200 realizations: Sx < 0.1 at tau_mf = %.1f, entropy > 0.8 at tau_mf = %.1f, "
                             "Sx(50) = %.3f",
                             t_sx, t_s, r.curve.sx[100])};
  });

  // 3. dTWA against exact on the same configurations.
  ObservableSeries dtwa_curve;
  run_criterion(3, 600.0, [&] {
    if (exact_curve.size() == 0) return std::pair{false, std::string("needs criterion 2")};
    ExperimentConfig c = small.cfg;
    c.method = Method::DTWA;
    c.n_traj = 100;
    c.times = tau_grid(tol::kDtwaTau, 21, small.j_mf);
    const ExperimentResult r = run(c, "c3_dtwa_n12");
    dtwa_curve = r.curve;
    double err = 0.0;
    for (std::size_t k = 0; k < r.curve.size(); ++k) err = std::max(err, std::abs(r.curve.sx[k] - exact_curve.sx[k]));
    return std::pair{err < tol::kDtwaExact, fmt("max |Sx_dTWA - Sx_exact| = %.4f for tau_mf <= 10", err)};
  });

  // 4. Mean-field dynamics: none from the ideal state, little with pulses.
  run_criterion(4, 0.0, [] {
    double ideal = 0.0, pulsed = 0.0;
    for (int row = 1; row <= 4; ++row) {
      ExperimentConfig c = preset("cloud_row" + std::to_string(row));
      c.method = Method::MeanField;
      c.n_realizations = 2;
      c.fit = false;
      c.protocol.include_pulses = false;
      const ExperimentResult a = run(c, "c4_mf_ideal_row" + std::to_string(row));
      for (double v : a.curve.sx) ideal = std::max(ideal, std::abs(v - 0.5));
      c.protocol.include_pulses = true;
      const ExperimentResult b = run(c, "c4_mf_pulsed_row" + std::to_string(row));
      for (double v : b.curve.sx) pulsed = std::max(pulsed, std::abs(v - b.curve.sx.front()));
    }
    const bool ok = ideal < tol::kMeanFieldIdeal && pulsed < tol::kMeanFieldPulsed;
    return std::pair{ok, fmt("experimental clouds, 0-10 us: ideal max |Sx - 1/2| = %.1e, pulsed relaxation %.4f", ideal,
                             pulsed)};
  });

  // 5. Stretching exponent of homogeneous dTWA runs.
  const std::vector<std::string> dens_names{"homogeneous_1p25e8", "homogeneous_3p51e8", "homogeneous_8p73e8",
                                            "homogeneous_2p11e9"};
  std::vector<ExperimentResult> homog;
  run_criterion(5, 3600.0, [&] {
    std::string detail = "beta =";
    double lo = INFINITY, hi = -INFINITY;
    bool in_window = true;
    for (std::size_t k = 0; k < dens_names.size(); ++k) {
      ExperimentConfig c = preset(dens_names[k]);
      c.workers = 8;
      homog.push_back(run(c, "c5_" + dens_names[k]));
      const ExperimentResult& r = homog.back();
      if (!r.fit) throw Error(ErrorCode::NonConvergence, dens_names[k] + ": " + r.fit_error.value_or("no fit"));
      const double disorder = std::pow(r.scales.a_tilde / c.geometry.blockade_radius, -3.0);
      detail += fmt(" %.3f(%.3f)", r.fit->beta, r.fit->beta_err());
      if (k < 3) {
        lo = std::min(lo, r.fit->beta);
        hi = std::max(hi, r.fit->beta);
        in_window = in_window && std::abs(r.fit->beta - tol::kBetaTarget) <= tol::kBetaWindow;
      } else {
        detail += fmt(" [dense, (a~/R_bl)^-3 = %.2f]", disorder);
      }
    }
    detail += fmt("; spread over the dilute three %.3f", hi - lo);
    return std::pair{in_window && hi - lo < tol::kBetaSpread, detail};
  });

  // 6. Collapse by the mean-field scale and its breakdown at high density.
  run_criterion(6, 0.0, [&] {
    if (homog.size() < 4) return std::pair{false, std::string("needs criterion 5")};
    std::vector<ObservableSeries> curves;
    std::vector<double> jmf, jws;
    for (const auto& r : homog) {
      curves.push_back(r.curve);
      jmf.push_back(r.scales.j_mf);
      jws.push_back(r.scales.j_ws);
    }
    const std::vector<ObservableSeries> three(curves.begin(), curves.begin() + 3);
    const CollapseReport c3 = rescale_collapse(three, {jmf.begin(), jmf.begin() + 3});
    const CollapseReport c4 = rescale_collapse(curves, jmf);
    const CollapseReport naive = rescale_collapse(three, {jws.begin(), jws.begin() + 3});
    const bool ok = c3.dispersion < tol::kCollapse && c4.dispersion >= tol::kBreakdownFactor * c3.dispersion;
    return std::pair{ok, fmt("dispersion by C6/a~^6: three %.4f, four %.4f (x%.2f); naive C6/a^6 three %.4f",
                             c3.dispersion, c4.dispersion, c4.dispersion / c3.dispersion, naive.dispersion)};
  });

  // 7. Ising limit: dTWA is exact, and the closed form stretches with beta = 1/2.
  run_criterion(7, 300.0, [] {
    ExperimentConfig c;
    c.geometry.kind = GeometryKind::UniformBox;
    c.geometry.periodic = true;
    c.geometry.count = 60;
    c.geometry.peak_density = 3.51e8 * kPerCubicCm;
    c.geometry.blockade_radius = 5.0;
    c.xxz.ising = true;
    c.protocol.include_pulses = false;
    c.method = Method::DTWA;
    c.n_traj = 100;
    c.n_realizations = 3;
    c.seed = 707;
    c.workers = 8;
    c.fit = false;
    c.times = tau_grid(20.0, 41, c.wigner_seitz_scale());
    const ExperimentResult r = run(c, "c7_ising_dtwa");
    double worst = 0.0;
    const auto times = c.time_points();
    for (std::size_t k = 0; k < r.realizations.size(); ++k) {
      const CouplingMatrix m = build_coupling_matrix(sample_realization(c, k), c.xxz);
      const ObservableSeries er = emch_radin_ising(m, times);
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double d = std::abs(r.realizations[k].sx[i] - er.sx[i]);
        if (d == 0.0) continue;
        worst = std::max(worst, d / r.realizations[k].sx_err[i]);
      }
    }

    // Unblockaded disordered ensembles.
    ExperimentConfig u;
    u.geometry.kind = GeometryKind::UniformBox;
    u.geometry.periodic = true;
    u.geometry.count = 1500;
    u.geometry.peak_density = 3.51e8 * kPerCubicCm;
    u.geometry.blockade_radius = 0.0;
    u.method = Method::EmchRadin;
    u.n_realizations = 5;
    u.seed = 708;
    u.workers = 8;
    u.fit = false;
    std::vector<double> jmf;
    for (std::size_t k = 0; k < u.n_realizations; ++k)
      jmf.push_back(build_coupling_matrix(sample_realization(u, k), u.xxz).j_mf_median());
    const double j = std::accumulate(jmf.begin(), jmf.end(), 0.0) / static_cast<double>(jmf.size());
    u.times = tau_grid(300.0, 301, j, 1e-3);
    const ExperimentResult e = run(u, "c7_emch_radin_unblockaded");
    FitOptions fo;
    fo.exclude_early = false;
    fo.use_weights = false;
    const FitResult f = fit_stretched_exponential(e.curve, 0.0, fo);
    const bool ok = worst <= tol::kIsingSigmas && std::abs(f.beta - tol::kIsingBeta) <= tol::kIsingBetaWindow;
    return std::pair{ok, fmt("max dTWA deviation %.2f standard errors; closed-form beta = %.3f", worst, f.beta)};
  });

  // 8. Fluctuator model on the homogeneous ensembles, with the unblockaded
  // nearest-neighbour distribution as the reference.
  run_criterion(8, 0.0, [&] {
    const ExperimentConfig ref = preset(dens_names[1]);
    const double c6 = ref.xxz.c6;
    const double j0 = ref.wigner_seitz_scale();
    const CouplingDistribution hertz =
        hertz_coupling_distribution(std::pow(c6 / j0, 1.0 / 6.0), c6, Binning{1e-6 * j0, 1e4 * j0, 400, true});
    const FluctuatorResult h = fluctuator_model(hertz, ref.time_points());
    if (!h.fit) throw Error(ErrorCode::NonConvergence, "fluctuator fit failed");

    std::string detail = fmt("unblockaded beta = %.3f; blockaded ensembles beta =", h.fit->beta);
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t k = 0; k < dens_names.size(); ++k) {
      ExperimentConfig c = preset(dens_names[k]);
      c.method = Method::Fluctuator;
      const ExperimentResult r = run(c, "c8_fluctuator_" + dens_names[k]);
      if (!r.fit) throw Error(ErrorCode::NonConvergence, dens_names[k] + ": " + r.fit_error.value_or("no fit"));
      detail += fmt(" %.3f", r.fit->beta);
      if (k < 3) {
        lo = std::min(lo, r.fit->beta);
        hi = std::max(hi, r.fit->beta);
      }
    }
    const bool ok = h.fit->beta > tol::kFluctuatorBetaFloor && hi - lo > tol::kFluctuatorBetaSpread;
    return std::pair{ok, detail + fmt(" (spread over the dilute three %.3f)", hi - lo)};
  });

  // 9. Readout inversion.
  run_criterion(9, 0.0, [] {
    std::mt19937_64 g(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DetectionModel clean;
    clean.noise = CountingNoise::None;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double r = 0.5 * std::sqrt(u(g)), th = 2.0 * std::numbers::pi * u(g);
      const double sx = r * std::cos(th), sy = r * std::sin(th), t = 10.0 * u(g), n = 200.0 + 2000.0 * u(g);
      const Reconstruction rec =
          reconstruct_magnetization(simulate_phase_scan(sx, sy, n, t, default_phases(), clean, 1), clean.eta);
      const double n_aux = clean.aux_rate * t * n;
      worst = std::max({worst, std::abs(rec.sx - sx), std::abs(rec.sy - sy), std::abs(rec.n_total - n) / n,
                        std::abs(rec.n_aux - n_aux) / n});
    }
    DetectionModel noisy;
    const double sx = 0.3, sy = -0.12, truth = std::hypot(sx, sy);
    int covered = 0;
    for (int seed = 0; seed < 1000; ++seed) {
      const Reconstruction rec =
          reconstruct_magnetization(simulate_phase_scan(sx, sy, 1000.0, 3.0, default_phases(), noisy, seed), noisy.eta);
      if (std::abs(rec.planar - truth) <= 2.0 * rec.planar_err) ++covered;
    }
    const double cov = covered / 1000.0;
    const bool ok = worst < tol::kReadoutRoundTrip && cov >= tol::kReadoutCoverage;
    return std::pair{ok, fmt("noiseless worst error %.1e (counts relative to N); 2 sigma coverage %.1f%%", worst,
                             100.0 * cov)};
  });

  // 11 before 10 so the repeated runs also count towards conservation.
  Outcome determinism{11, false, "", 0.0};
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      double worst = 0.0;
      bool identical = true;
      for (Method m : {Method::Exact, Method::DTWA}) {
        if (small.j_mf == 0.0) small = small_ensemble();
        ExperimentConfig c = small.cfg;
        c.method = m;
        c.n_traj = 100;
        c.times = m == Method::Exact ? tau_grid(100.0, 201, small.j_mf) : tau_grid(tol::kDtwaTau, 21, small.j_mf);
        const ObservableSeries& eight = m == Method::Exact ? exact_curve : dtwa_curve;
        c.workers = 1;
        const ExperimentResult one = run(c, std::string("c11_") + to_string(m) + "_w1");
        worst = std::max(worst, max_curve_diff(one.curve, eight));
        identical = identical && curve_text(one.curve) == curve_text(eight);
      }
      determinism.pass = worst <= tol::kDeterminism;
      determinism.detail = fmt("criteria 2 and 3 with 1 vs 8 workers: max difference %.1e, curve files %s", worst,
                               identical ? "byte-identical" : "differ");
    } catch (const std::exception& e) {
      determinism.detail = std::string("error: ") + e.what();
    }
    determinism.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  // 10. Conservation across every run above.
  {
    const ConservationReport& c = g_conservation;
    const bool ok = c.spin_norm_drift < tol::kSpinNorm && c.energy_drift < tol::kClassicalEnergy &&
                    c.quantum_sz_drift < tol::kQuantumSz && c.quantum_norm_drift < tol::kQuantumNorm;
    record(10, ok,
           fmt("spin norm %.1e, classical energy %.1e, quantum Sz %.1e, state norm %.1e (quantum energy %.1e)",
               c.spin_norm_drift, c.energy_drift, c.quantum_sz_drift, c.quantum_norm_drift, c.quantum_energy_drift),
           0.0);
  }
  record(determinism.id, determinism.pass, determinism.detail, determinism.seconds);

  int failed = 0;
  for (const auto& o : g_outcomes) failed += o.pass ? 0 : 1;
  std::printf("acceptance: %zu criteria, %d failed\n", g_outcomes.size(), failed);
  return failed == 0 ? 0 : 1;
}
