#include "xxz/readout.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "xxz/error.hpp"

namespace xxz {

void DetectionModel::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::ConfigError, "eta must be in (0, 1]");
  if (!(aux_rate >= 0.0)) throw Error(ErrorCode::ConfigError, "aux_rate must be >= 0");
  if (!(leakage >= 0.0 && leakage <= 1.0)) throw Error(ErrorCode::ConfigError, "leakage must be in [0, 1]");
}

namespace {

double draw(double mean, const DetectionModel& model, Rng* rng) {
  if (model.noise == CountingNoise::None) return mean;
  if (rng == nullptr) throw Error(ErrorCode::DomainError, "Poissonian counting needs a generator");
  return static_cast<double>(rng->poisson(mean));
}

}  // namespace

CountSample simulate_counts_with_aux(double n_up, double n_down, double n_aux, const DetectionModel& model,
                                     Rng* rng) {
  model.validate();
  if (n_up < 0.0 || n_down < 0.0 || n_aux < 0.0) throw Error(ErrorCode::DomainError, "populations must be >= 0");
  CountSample c;
  c.m_up = draw(model.eta * (n_up + model.leakage * n_down + n_aux), model, rng);
  c.m_total = draw(model.eta * (n_up + n_down + n_aux), model, rng);
  return c;
}

CountSample simulate_counts(double n_up, double n_down, double t, const DetectionModel& model, Rng* rng) {
  if (t < 0.0) throw Error(ErrorCode::DomainError, "time must be >= 0");
  return simulate_counts_with_aux(n_up, n_down, model.aux_rate * t * (n_up + n_down), model, rng);
}

std::vector<double> default_phases(std::size_t count) {
  std::vector<double> p(count);
  for (std::size_t k = 0; k < count; ++k) p[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / count;
  return p;
}

PhaseScan simulate_phase_scan(double sx, double sy, double n_total, double t, const std::vector<double>& phases,
                              const DetectionModel& model, std::uint64_t seed) {
  if (n_total < 0.0) throw Error(ErrorCode::DomainError, "n_total must be >= 0");
  Rng rng(seed);
  PhaseScan scan;
  scan.t = t;
  scan.phases = phases;
  const double n_aux = model.aux_rate * t * n_total;
  for (double phi : phases) {
    const double s_phi = sx * std::cos(phi) + sy * std::sin(phi);
    const double up = std::max(0.0, n_total * (0.5 + s_phi));
    const CountSample c = simulate_counts_with_aux(up, std::max(0.0, n_total - up), n_aux, model, &rng);
    scan.m_up.push_back(c.m_up);
    scan.m_total.push_back(c.m_total);
  }
  scan.true_sx = sx;
  scan.true_sy = sy;
  scan.true_n_total = n_total;
  scan.true_n_aux = n_aux;
  return scan;
}

SinusoidFit sinusoidal_fit(const PhaseScan& scan, bool poisson_weights) {
  const std::size_t n = scan.phases.size();
  if (scan.m_up.size() != n) throw Error(ErrorCode::DimensionMismatch, "phases and counts differ in length");
  if (n < 4) throw Error(ErrorCode::FitDegenerate, "sinusoidal fit needs at least 4 phases");
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (scan.m_up[k] < 0.0) throw Error(ErrorCode::DomainError, "counts must be >= 0");
    x(k, 0) = 1.0;
    x(k, 1) = std::cos(scan.phases[k]);
    x(k, 2) = std::sin(scan.phases[k]);
    y[k] = scan.m_up[k];
    w[k] = poisson_weights ? 1.0 / std::max(scan.m_up[k], 1.0) : 1.0;
  }
  Eigen::Matrix3d normal = x.transpose() * w.asDiagonal() * x;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(normal, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = es.eigenvalues();  // ascending
  if (!(ev[0] > 1e-10 * ev[2])) throw Error(ErrorCode::FitDegenerate, "phases do not determine a sinusoid");
  Eigen::Matrix3d inv = normal.inverse();
  Eigen::Vector3d c = inv * (x.transpose() * w.asDiagonal() * y);
  if (poisson_weights) {
    // Weights from observed counts pull the fit towards low fluctuations;
    // two reweighting passes with the fitted means remove that bias.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd model = x * c;
      for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 / std::max(model[k], 1.0);
      normal = x.transpose() * w.asDiagonal() * x;
      inv = normal.inverse();
      c = inv * (x.transpose() * w.asDiagonal() * y);
    }
  }
  const Eigen::VectorXd r = y - x * c;

  SinusoidFit f;
  f.mean = c[0];
  f.amplitude = std::hypot(c[1], c[2]);
  f.phase = f.amplitude > 0.0 ? std::atan2(c[2], c[1]) : 0.0;
  f.residual_norm = std::sqrt(r.dot(w.asDiagonal() * r));
  double scale = 1.0;
  if (!poisson_weights) scale = n > 3 ? r.squaredNorm() / static_cast<double>(n - 3) : 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) f.cov[a][b] = scale * inv(a, b);
  }
  return f;
}

Reconstruction reconstruct_magnetization(const PhaseScan& scan, double eta, std::optional<double> aux_tolerance,
                                         bool poisson_weights) {
  if (!(eta > 0.0)) throw Error(ErrorCode::DomainError, "eta must be > 0");
  if (scan.m_total.size() != scan.phases.size()) {
    throw Error(ErrorCode::DimensionMismatch, "total counts missing for some phases");
  }
  const SinusoidFit f = sinusoidal_fit(scan, poisson_weights);
  double m_tot = 0.0;
  for (double m : scan.m_total) m_tot += m;
  const double n_ph = static_cast<double>(scan.m_total.size());
  m_tot /= n_ph;

  const double n_det = 2.0 * (m_tot - f.mean);
  const double aux_det = f.mean - 0.5 * n_det;
  if (!(n_det > 0.0)) throw Error(ErrorCode::NonPhysical, "inferred total population is not positive");
  const double tol = aux_tolerance ? *aux_tolerance : 5.0 * std::sqrt(std::max(f.mean, 1.0));
  if (aux_det < -tol) throw Error(ErrorCode::NonPhysical, "inferred auxiliary population is negative");

  Reconstruction r;
  r.n_total = n_det / eta;
  r.n_aux = aux_det / eta;
  const double cx = f.amplitude * std::cos(f.phase);
  const double cy = f.amplitude * std::sin(f.phase);
  r.sx = cx / n_det;
  r.sy = cy / n_det;
  r.planar = f.amplitude / n_det;

  // Delta method over (c0, c1, c2, M_tot) with Var(mean M_tot) = M_tot / n_phases.
  const double var_mtot = std::max(m_tot, 0.0) / n_ph;
  double g[3] = {2.0 * f.amplitude / (n_det * n_det), 0.0, 0.0};
  if (f.amplitude > 0.0) {
    g[1] = cx / (f.amplitude * n_det);
    g[2] = cy / (f.amplitude * n_det);
  }
  const double g_mtot = -2.0 * f.amplitude / (n_det * n_det);
  double var = g_mtot * g_mtot * var_mtot;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) var += g[a] * f.cov[a][b] * g[b];
  }
  r.planar_err = std::sqrt(std::max(var, 0.0));

  r.s_phi.reserve(scan.m_up.size());
  for (double m : scan.m_up) {
    const double s = (m - f.mean) / n_det;
    const double sigma = std::sqrt(std::max(m, 1.0)) / n_det;
    if (std::abs(s) > 0.5 + 3.0 * sigma) r.out_of_range = true;
    r.s_phi.push_back(s);
  }
  return r;
}

ReadoutSeries simulate_readout(const ObservableSeries& truth, double n_total, const DetectionModel& model,
                               const std::vector<double>& phases, std::uint64_t seed) {
  model.validate();
  ReadoutSeries out;
  out.curve.times = truth.times;
  out.curve.allocate(false);
  out.n_aux.resize(truth.size());
  const bool noisy = model.noise == CountingNoise::Poissonian;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    PhaseScan scan = simulate_phase_scan(truth.sx[k], truth.sy[k], n_total, truth.times[k], phases, model,
                                         derive_seed(seed, {0x72656164, k}));
    const Reconstruction r = reconstruct_magnetization(scan, model.eta, std::nullopt, noisy);
    out.curve.sx[k] = r.sx;
    out.curve.sy[k] = r.sy;
    // The quadratures share the planar error budget.
    out.curve.sx_err[k] = r.planar_err;
    out.curve.sy_err[k] = r.planar_err;
    out.n_aux[k] = r.n_aux;
    out.scans.push_back(std::move(scan));
  }
  return out;
}

void write_phase_scans(std::ostream& os, const std::vector<PhaseScan>& scans) {
  os << "# t_us phi_rad M_up M_tot\n";
  char buf[160];
  for (const auto& s : scans) {
    for (std::size_t k = 0; k < s.phases.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", s.t, s.phases[k], s.m_up[k], s.m_total[k]);
      os << buf;
    }
  }
}

std::vector<PhaseScan> read_phase_scans(std::istream& is) {
  std::vector<PhaseScan> scans;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, phi, mu, mt;
    if (!(ls >> t >> phi >> mu >> mt)) {
      throw Error(ErrorCode::IoError, "malformed phase-scan row at line " + std::to_string(lineno));
    }
    if (scans.empty() || scans.back().t != t) {
      scans.emplace_back();
      scans.back().t = t;
    }
    scans.back().phases.push_back(phi);
    scans.back().m_up.push_back(mu);
    scans.back().m_total.push_back(mt);
  }
  return scans;
}

}  // namespace xxz
