#include "xxz/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "xxz/error.hpp"
#include "xxz/rng.hpp"
#include "xxz/units.hpp"

namespace xxz {

double FitResult::gamma_err() const { return std::sqrt(std::max(cov[0][0], 0.0)); }
double FitResult::beta_err() const { return std::sqrt(std::max(cov[1][1], 0.0)); }
double FitResult::evaluate(double t) const { return amplitude * std::exp(-std::pow(gamma * t, beta)); }

// ---------------------------------------------------------------------------
// Stretched exponential

namespace {

struct Window {
  std::vector<double> t, y, w;
  double t_min = 0.0, t_max = 0.0;
};

Window select_window(const ObservableSeries& c, double j_max, const FitOptions& o) {
  if (c.sx.size() != c.size()) throw Error(ErrorCode::DimensionMismatch, "curve columns differ in length");
  Window win;
  win.t_min = 0.0;
  if (o.t_min) {
    win.t_min = *o.t_min;
  } else if (o.exclude_early && j_max > 0.0) {
    // 1/J_max in ordinary frequency: the quadratic onset lasts ~2 pi R_bl^6 / C6.
    win.t_min = 1.0 / j_max;
  }
  if (o.t_max) {
    win.t_max = *o.t_max;
  } else {
    win.t_max = -1.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c.sx[k] > o.floor) win.t_max = c.times[k];
    }
  }
  bool weighted = o.use_weights && c.sx_err.size() == c.size();
  for (std::size_t k = 0; k < c.size() && weighted; ++k) {
    const double t = c.times[k];
    if (t > 0.0 && t >= win.t_min && t <= win.t_max && !(c.sx_err[k] > 0.0)) weighted = false;
  }
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double t = c.times[k];
    if (t <= 0.0 || t < win.t_min || t > win.t_max) continue;
    win.t.push_back(t);
    win.y.push_back(c.sx[k]);
    win.w.push_back(weighted ? 1.0 / (c.sx_err[k] * c.sx_err[k]) : 1.0);
  }
  if (win.t.size() < 6) {
    throw Error(ErrorCode::WindowTooSmall,
                "stretched-exponential fit needs >= 6 points in the window, found " + std::to_string(win.t.size()));
  }
  return win;
}

// Parameters p = (ln gamma, beta, amplitude).
struct LmOutcome {
  bool ok = false;
  Eigen::Vector3d p;
  double cost = std::numeric_limits<double>::infinity();
  Eigen::Matrix3d jtj;
};

double model(const Eigen::Vector3d& p, double t, double& d_u, double& d_beta, double& d_amp) {
  const double x = p[1] * (p[0] + std::log(t));
  const double ex = std::exp(x);
  const double f = std::exp(-ex);
  d_amp = f;
  d_u = -p[2] * f * ex * p[1];
  d_beta = -p[2] * f * ex * (p[0] + std::log(t));
  return p[2] * f;
}

LmOutcome levenberg_marquardt(const Window& win, Eigen::Vector3d p, bool free_amp, unsigned max_iter) {
  const std::size_t n = win.t.size();
  const int np = free_amp ? 3 : 2;
  auto evaluate = [&](const Eigen::Vector3d& q, Eigen::MatrixXd* jac, Eigen::VectorXd& r) {
    r.resize(n);
    if (jac) jac->resize(n, np);
    double cost = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double du, db, da;
      const double f = model(q, win.t[k], du, db, da);
      const double sw = std::sqrt(win.w[k]);
      r[k] = sw * (win.y[k] - f);
      cost += r[k] * r[k];
      if (jac) {
        (*jac)(k, 0) = sw * du;
        (*jac)(k, 1) = sw * db;
        if (free_amp) (*jac)(k, 2) = sw * da;
      }
    }
    return cost;
  };

  LmOutcome out;
  Eigen::MatrixXd jac;
  Eigen::VectorXd r, r_try;
  double cost = evaluate(p, &jac, r);
  double lambda = 1e-3;
  for (unsigned it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-30 + 1e-15 * cost) break;
    bool improved = false;
    Eigen::VectorXd step;
    for (int inner = 0; inner < 40; ++inner) {
      Eigen::MatrixXd damped = a;
      for (int d = 0; d < np; ++d) damped(d, d) += lambda * std::max(a(d, d), 1e-30);
      step = damped.ldlt().solve(g);
      Eigen::Vector3d q = p;
      for (int d = 0; d < np; ++d) q[d] += step[d];
      const double c_try = std::isfinite(q.sum()) && q[1] > 0.0 ? evaluate(q, nullptr, r_try)
                                                                 : std::numeric_limits<double>::infinity();
      if (c_try < cost) {
        p = q;
        const double rel = (cost - c_try) / std::max(cost, 1e-300);
        cost = evaluate(p, &jac, r);
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < 1e-15 && step.norm() < 1e-13 * (1.0 + p.head(np).norm())) it = max_iter;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e16) break;
    }
    if (!improved) break;
    if (step.norm() < 1e-14 * (1.0 + p.head(np).norm())) break;
  }
  out.ok = std::isfinite(cost) && p[1] > 0.0 && p[1] <= 2.0 && std::isfinite(p[0]);
  out.p = p;
  out.cost = cost;
  Eigen::MatrixXd a = jac.transpose() * jac;
  out.jtj.setZero();
  out.jtj.topLeftCorner(np, np) = a;
  return out;
}

}  // namespace

FitResult fit_stretched_exponential(const ObservableSeries& curve, double j_max, const FitOptions& options) {
  const Window win = select_window(curve, j_max, options);
  const std::size_t n = win.t.size();
  const int np = options.free_amplitude ? 3 : 2;

  // Rate guess from the 1/(2e) crossing of the full curve.
  const double target = 0.5 / std::exp(1.0);
  double t_cross = win.t.back();
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
    if (curve.times[k + 1] > 0.0 && curve.sx[k] > target && curve.sx[k + 1] <= target) {
      t_cross = curve.times[k + 1];
      break;
    }
  }
  const double gamma0 = 1.0 / t_cross;

  LmOutcome best;
  for (double b0 : options.beta_starts) {
    LmOutcome o = levenberg_marquardt(win, Eigen::Vector3d(std::log(gamma0), b0, 0.5), options.free_amplitude,
                                      options.max_iterations);
    if (o.ok && o.cost < best.cost) best = o;
  }
  if (!best.ok) throw Error(ErrorCode::NonConvergence, "stretched-exponential fit failed from every start");

  FitResult f;
  f.gamma = std::exp(best.p[0]);
  f.beta = best.p[1];
  f.amplitude = options.free_amplitude ? best.p[2] : 0.5;
  f.fixed_amplitude = !options.free_amplitude;
  f.t_min = win.t_min;
  f.t_max = win.t_max;
  f.points = n;
  f.residual_norm = std::sqrt(best.cost);

  const bool weighted = std::any_of(win.w.begin(), win.w.end(), [](double w) { return w != 1.0; });
  const Eigen::MatrixXd a = best.jtj.topLeftCorner(np, np);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (lu.isInvertible()) {
    Eigen::MatrixXd cov = lu.inverse();
    if (!weighted) cov *= n > static_cast<std::size_t>(np) ? best.cost / static_cast<double>(n - np) : 0.0;
    // Transform the ln(gamma) row to gamma.
    Eigen::VectorXd jacobian = Eigen::VectorXd::Ones(np);
    jacobian[0] = f.gamma;
    for (int r = 0; r < np; ++r) {
      for (int c = 0; c < np; ++c) f.cov[r][c] = jacobian[r] * cov(r, c) * jacobian[c];
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Collapse

namespace {

// Linear interpolation in log(tau); xs strictly increasing.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const auto it = std::lower_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  const std::size_t k = static_cast<std::size_t>(it - xs.begin());
  const double f = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + f * (ys[k] - ys[k - 1]);
}

}  // namespace

CollapseReport rescale_collapse(const std::vector<ObservableSeries>& curves, const std::vector<double>& scales,
                                const CollapseOptions& options) {
  if (curves.size() < 2) throw Error(ErrorCode::DomainError, "collapse needs at least 2 curves");
  if (curves.size() != scales.size()) throw Error(ErrorCode::DimensionMismatch, "one scale per curve required");
  if (options.grid_points < 2) throw Error(ErrorCode::DomainError, "collapse grid needs >= 2 points");
  std::vector<std::vector<double>> logtau(curves.size()), vals(curves.size());
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < curves.size(); ++c) {
    if (!(scales[c] > 0.0)) throw Error(ErrorCode::DomainError, "collapse scales must be positive");
    for (std::size_t k = 0; k < curves[c].size(); ++k) {
      const double t = curves[c].times[k];
      if (t <= 0.0) continue;
      const double x = std::log(angular(scales[c]) * t);
      if (!logtau[c].empty() && x <= logtau[c].back()) {
        throw Error(ErrorCode::DomainError, "curve times must be strictly increasing");
      }
      logtau[c].push_back(x);
      vals[c].push_back(curves[c].sx[k]);
    }
    if (logtau[c].size() < 2) throw Error(ErrorCode::NoOverlap, "curve has fewer than 2 positive times");
    lo = std::max(lo, logtau[c].front());
    hi = std::min(hi, logtau[c].back());
  }
  if (!(lo < hi)) throw Error(ErrorCode::NoOverlap, "rescaled curves share no common time range");

  CollapseReport rep;
  rep.scales = scales;
  const std::size_t m = options.grid_points;
  rep.values.assign(curves.size(), std::vector<double>(m));
  rep.spread.assign(m, 0.0);
  for (std::size_t g = 0; g < m; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(m - 1);
    rep.grid.push_back(std::exp(x));
    double mean = 0.0;
    for (std::size_t c = 0; c < curves.size(); ++c) {
      rep.values[c][g] = interp(logtau[c], vals[c], x);
      mean += rep.values[c][g];
    }
    mean /= static_cast<double>(curves.size());
    double var = 0.0;
    for (std::size_t c = 0; c < curves.size(); ++c) var += (rep.values[c][g] - mean) * (rep.values[c][g] - mean);
    rep.spread[g] = std::sqrt(var / static_cast<double>(curves.size()));
    rep.dispersion = std::max(rep.dispersion, rep.spread[g]);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Fluctuator model

FluctuatorResult fluctuator_model(const CouplingDistribution& g, const std::vector<double>& times,
                                  const FluctuatorOptions& options) {
  const std::size_t nb = g.bins();
  if (nb == 0 || g.edges.size() != nb + 1) throw Error(ErrorCode::BinningMismatch, "malformed distribution");
  std::vector<double> mass(nb);
  double total = 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    mass[k] = g.density[k] * g.width(k);
    if (mass[k] < 0.0) throw Error(ErrorCode::DomainError, "negative probability mass");
    total += mass[k];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DomainError, "distribution has no mass");

  std::vector<double> rates, weights;
  if (options.mode == FluctuatorMode::Quadrature) {
    for (std::size_t k = 0; k < nb; ++k) {
      if (mass[k] == 0.0) continue;
      rates.push_back(angular(g.center(k)));
      weights.push_back(mass[k] / total);
    }
  } else {
    if (options.samples < 1) throw Error(ErrorCode::DomainError, "Monte Carlo needs >= 1 sample");
    Rng rng(options.seed);
    std::vector<double> cdf(nb);
    double acc = 0.0;
    for (std::size_t k = 0; k < nb; ++k) cdf[k] = (acc += mass[k] / total);
    for (std::size_t s = 0; s < options.samples; ++s) {
      const double u = rng.uniform();
      const std::size_t k =
          std::min<std::size_t>(static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin()),
                                nb - 1);
      rates.push_back(angular(rng.uniform(g.edges[k], g.edges[k + 1])));
      weights.push_back(1.0 / static_cast<double>(options.samples));
    }
  }

  FluctuatorResult res;
  res.curve.times = times;
  res.curve.allocate(false);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < rates.size(); ++q) s += weights[q] * std::exp(-rates[q] * times[k]);
    res.curve.sx[k] = 0.5 * s;
  }
  if (options.fit_curve) {
    FitOptions fo = options.fit;
    fo.use_weights = false;
    res.fit = fit_stretched_exponential(res.curve, 0.0, fo);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Early-time diagnostics

EarlyTimeReport early_time_check(const ObservableSeries& curve, double j_max) {
  if (!(j_max > 0.0)) throw Error(ErrorCode::DomainError, "j_max must be positive");
  const double edge = 0.2 / angular(j_max);
  std::vector<double> t, y;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve.times[k] > 0.0 && curve.times[k] < edge) {
      t.push_back(curve.times[k]);
      y.push_back(0.5 - curve.sx[k]);
    }
  }
  if (t.size() < 4) throw Error(ErrorCode::WindowTooSmall, "early-time check needs >= 4 points before 0.2/J_max");
  const std::size_t n = t.size();
  EarlyTimeReport rep;
  rep.points = n;
  rep.t_edge = t.back();
  // Scale columns by t_edge for conditioning.
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = t[k] / rep.t_edge;
    x(k, 0) = u;
    x(k, 1) = u * u;
    v[k] = y[k];
  }
  const Eigen::Vector2d c = x.colPivHouseholderQr().solve(v);
  const Eigen::VectorXd r = v - x * c;
  const double s2 = n > 2 ? r.squaredNorm() / static_cast<double>(n - 2) : 0.0;
  const Eigen::Matrix2d cov = s2 * (x.transpose() * x).inverse();
  rep.linear = c[0] / rep.t_edge;
  rep.quadratic = c[1] / (rep.t_edge * rep.t_edge);
  rep.linear_err = std::sqrt(std::max(cov(0, 0), 0.0)) / rep.t_edge;
  rep.quadratic_err = std::sqrt(std::max(cov(1, 1), 0.0)) / (rep.t_edge * rep.t_edge);
  const double quad_part = rep.quadratic * rep.t_edge * rep.t_edge;
  rep.linear_ratio = quad_part != 0.0 ? std::abs(rep.linear) * rep.t_edge / std::abs(quad_part)
                                      : (rep.linear == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  rep.quadratic_onset = rep.quadratic > 0.0 && rep.linear_ratio < 0.1;
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
void kv(std::ostream& os, const char* key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << key << " = " << buf << '\n';
}
}  // namespace

void write_fit(std::ostream& os, const FitResult& f) {
  os << "# stretched exponential A exp(-(gamma t)^beta); gamma in 1/us\n";
  kv(os, "gamma", f.gamma);
  kv(os, "gamma_err", f.gamma_err());
  kv(os, "beta", f.beta);
  kv(os, "beta_err", f.beta_err());
  kv(os, "amplitude", f.amplitude);
  kv(os, "cov_gamma_beta", f.cov[0][1]);
  kv(os, "t_min_us", f.t_min);
  kv(os, "t_max_us", f.t_max);
  kv(os, "points", static_cast<double>(f.points));
  kv(os, "residual_norm", f.residual_norm);
  os << "fixed_amplitude = " << (f.fixed_amplitude ? "true" : "false") << '\n';
}

void write_collapse(std::ostream& os, const CollapseReport& rep) {
  os << "# collapse: tau = 2 pi scale t\n";
  kv(os, "dispersion", rep.dispersion);
  for (std::size_t c = 0; c < rep.scales.size(); ++c) {
    os << "scale_" << c << "_MHz = ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", rep.scales[c]);
    os << buf << '\n';
  }
  os << "# tau";
  for (std::size_t c = 0; c < rep.values.size(); ++c) os << " Sx_" << c;
  os << " spread\n";
  char buf[64];
  for (std::size_t g = 0; g < rep.grid.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%.17g", rep.grid[g]);
    os << buf;
    for (const auto& v : rep.values) {
      std::snprintf(buf, sizeof buf, " %.17g", v[g]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " %.17g\n", rep.spread[g]);
    os << buf;
  }
}

}  // namespace xxz
