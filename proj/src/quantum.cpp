#include "xxz/quantum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "xxz/error.hpp"
#include "xxz/kernels.hpp"
#include "xxz/units.hpp"

namespace xxz {

namespace {

double* raw(std::span<cplx> v) { return reinterpret_cast<double*>(v.data()); }
const double* raw(std::span<const cplx> v) { return reinterpret_cast<const double*>(v.data()); }

cplx inner(std::span<const cplx> x, std::span<const cplx> y) {
  double re = 0.0, im = 0.0;
  kernels::active().cdot(x.size(), raw(x), raw(y), &re, &im);
  return {re, im};
}

double norm2(std::span<const cplx> x) { return std::sqrt(inner(x, x).real()); }

}  // namespace

// ---------------------------------------------------------------------------
// QuantumState

QuantumState::QuantumState(unsigned n, std::vector<cplx> amplitudes) : n_(n), amp_(std::move(amplitudes)) {
  if (amp_.size() != (std::size_t{1} << n)) throw Error(ErrorCode::DimensionMismatch, "amplitude count != 2^n");
}

QuantumState QuantumState::x_polarized(unsigned n) {
  const std::size_t dim = std::size_t{1} << n;
  return QuantumState(n, std::vector<cplx>(dim, cplx(std::pow(2.0, -0.5 * n), 0.0)));
}

QuantumState QuantumState::all_up(unsigned n) {
  std::vector<cplx> a(std::size_t{1} << n, 0.0);
  a.back() = 1.0;
  return QuantumState(n, std::move(a));
}

QuantumState QuantumState::all_down(unsigned n) {
  std::vector<cplx> a(std::size_t{1} << n, 0.0);
  a.front() = 1.0;
  return QuantumState(n, std::move(a));
}

double QuantumState::norm() const { return norm2(amp_); }

// ---------------------------------------------------------------------------
// Hamiltonian

XXZHamiltonian::XXZHamiltonian(const CouplingMatrix& couplings, std::optional<ExternalField> ext, unsigned cap)
    : n_(static_cast<unsigned>(couplings.n())) {
  if (n_ > cap) {
    throw Error(ErrorCode::DomainError,
                "exact evolution of " + std::to_string(n_) + " spins exceeds cap " + std::to_string(cap));
  }
  const std::size_t dim = std::size_t{1} << n_;
  diag_.assign(dim, 0.0);
  const double delta = couplings.delta();
  double offdiag_sum = 0.0;
  for (unsigned i = 0; i < n_; ++i) {
    for (unsigned j = i + 1; j < n_; ++j) {
      const double jij = angular(couplings(i, j));
      if (jij == 0.0) continue;
      const double zz = 0.25 * delta * jij;
      const std::size_t mi = std::size_t{1} << i;
      const std::size_t mj = std::size_t{1} << j;
      for (std::size_t b = 0; b < dim; ++b) {
        diag_[b] += ((b & mi) != 0) == ((b & mj) != 0) ? zz : -zz;
      }
      if (!couplings.ising()) {
        pairs_.push_back({i, j, 0.5 * jij});
        offdiag_sum += 0.5 * std::abs(jij);
      }
    }
  }
  double hz = angular(couplings.sz_field());
  double rabi = 0.0;
  if (ext) {
    hz += angular(ext->detuning);
    rabi = angular(ext->rabi);
    if (rabi != 0.0) {
      has_drive_ = true;
      up_from_down_ = cplx(0.0, 0.5 * rabi) * std::exp(cplx(0.0, -ext->phase));
    }
  }
  if (hz != 0.0) {
    for (std::size_t b = 0; b < dim; ++b) {
      const int ups = std::popcount(b);
      diag_[b] += hz * (ups - 0.5 * n_);
    }
  }
  double dmax = 0.0;
  for (double d : diag_) dmax = std::max(dmax, std::abs(d));
  norm_bound_ = dmax + offdiag_sum + 0.5 * std::abs(rabi) * n_;
}

void XXZHamiltonian::apply(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != dim() || out.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "state dimension");
  const auto& k = kernels::active();
  k.diag_mul(dim(), diag_.data(), raw(in), raw(out));
  for (const Pair& p : pairs_) k.flip_flop(n_, p.i, p.j, p.c, raw(in), raw(out));
  if (has_drive_) {
    const cplx down_from_up = std::conj(up_from_down_);
    for (unsigned i = 0; i < n_; ++i) {
      const std::size_t low = std::size_t{1} << i;
      for (std::size_t base = 0; base < dim(); base += 2 * low) {
        // Runs [base, base+low) have bit i = 0 (down); partners have it set.
        const double* down_in = raw(in) + 2 * base;
        const double* up_in = raw(in) + 2 * (base + low);
        double* down_out = raw(out) + 2 * base;
        double* up_out = raw(out) + 2 * (base + low);
        k.caxpy(low, up_from_down_.real(), up_from_down_.imag(), down_in, up_out);
        k.caxpy(low, down_from_up.real(), down_from_up.imag(), up_in, down_out);
      }
    }
  }
}

double XXZHamiltonian::expectation(std::span<const cplx> psi) const {
  std::vector<cplx> tmp(psi.size());
  apply(psi, tmp);
  return inner(psi, tmp).real();
}

QuantumState apply_hamiltonian(const QuantumState& state, const CouplingMatrix& couplings,
                               std::optional<ExternalField> ext) {
  if (state.n() != couplings.n()) throw Error(ErrorCode::DimensionMismatch, "state and couplings differ in N");
  XXZHamiltonian h(couplings, ext, std::max(state.n(), kDefaultExactCap));
  std::vector<cplx> out(state.dim());
  h.apply(state.amplitudes(), out);
  return QuantumState(state.n(), std::move(out));
}

// ---------------------------------------------------------------------------
// Lanczos propagation

void krylov_propagate(const XXZHamiltonian& h, std::span<cplx> psi, double t, const KrylovOptions& options,
                      KrylovStats* stats) {
  if (t < 0.0) throw Error(ErrorCode::DomainError, "negative evolution time");
  if (t == 0.0) return;
  const std::size_t dim = h.dim();
  if (psi.size() != dim) throw Error(ErrorCode::DimensionMismatch, "state dimension");
  const std::size_t m_max = std::min<std::size_t>(options.max_dim, dim);
  const auto& k = kernels::active();

  std::vector<std::vector<cplx>> v(m_max + 1, std::vector<cplx>(dim));
  std::vector<double> alpha(m_max), beta(m_max + 1);
  double remaining = t;

  while (remaining > 0.0) {
    const double scale = norm2(psi);
    for (std::size_t q = 0; q < dim; ++q) v[0][q] = psi[q] / scale;

    // Error estimate for a trial step with an m-dimensional space.
    Eigen::VectorXd evals;
    Eigen::MatrixXd evecs;
    auto coefficients = [&](std::size_t m, double dt) {
      Eigen::VectorXcd c(m);
      for (std::size_t a = 0; a < m; ++a) {
        cplx s = 0.0;
        for (std::size_t e = 0; e < m; ++e) {
          s += evecs(a, e) * std::exp(cplx(0.0, -evals[e] * dt)) * evecs(0, e);
        }
        c[a] = s;
      }
      return c;
    };
    auto decompose = [&](std::size_t m) {
      Eigen::VectorXd d(m), sub(m > 1 ? m - 1 : 1);
      for (std::size_t a = 0; a < m; ++a) d[a] = alpha[a];
      for (std::size_t a = 0; a + 1 < m; ++a) sub[a] = beta[a + 1];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      if (m == 1) {
        evals = d;
        evecs = Eigen::MatrixXd::Identity(1, 1);
        return;
      }
      es.computeFromTridiagonal(d, sub.head(m - 1), Eigen::ComputeEigenvectors);
      evals = es.eigenvalues();
      evecs = es.eigenvectors();
    };

    std::size_t m = 0;
    bool breakdown = false;
    double dt = remaining;
    Eigen::VectorXcd c;
    bool accepted = false;
    for (m = 1; m <= m_max; ++m) {
      auto& w = v[m];
      h.apply(v[m - 1], w);
      if (stats) ++stats->matvecs;
      alpha[m - 1] = inner(v[m - 1], w).real();
      // Full reorthogonalization, two passes.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t a = 0; a < m; ++a) {
          const cplx proj = inner(v[a], w);
          k.caxpy(dim, -proj.real(), -proj.imag(), raw(std::span<const cplx>(v[a])), raw(std::span<cplx>(w)));
        }
      }
      beta[m] = norm2(w);
      breakdown = beta[m] <= 1e-13 * std::max(1.0, h.norm_bound());
      if (!breakdown) {
        for (auto& z : w) z /= beta[m];
      }
      const bool check = breakdown || m == m_max || (m >= 4 && m % 2 == 0);
      if (!check) continue;
      decompose(m);
      c = coefficients(m, dt);
      const double err = breakdown ? 0.0 : beta[m] * std::abs(c[m - 1]);
      if (err <= options.tol * dt / t) {
        accepted = true;
        break;
      }
      if (breakdown || m == m_max) break;
    }
    if (m > m_max) m = m_max;
    if (!accepted) {
      // Shrink the step until the estimate fits the budget.
      for (int tries = 0; tries < 200; ++tries) {
        dt *= 0.5;
        c = coefficients(m, dt);
        const double err = beta[m] * std::abs(c[m - 1]);
        if (err <= options.tol * dt / t) {
          accepted = true;
          break;
        }
      }
      if (!accepted) throw Error(ErrorCode::ConvergenceFailure, "Krylov error estimate cannot meet tolerance");
    }
    std::fill(psi.begin(), psi.end(), cplx(0.0));
    for (std::size_t a = 0; a < m; ++a) {
      const cplx f = scale * c[a];
      k.caxpy(dim, f.real(), f.imag(), raw(std::span<const cplx>(v[a])), raw(psi));
    }
    remaining -= dt;
    if (remaining < 1e-15 * t) remaining = 0.0;
    if (stats) ++stats->substeps;
  }
}

QuantumState evolve_exact(const QuantumState& state, const CouplingMatrix& couplings,
                          std::optional<ExternalField> ext, double t, const KrylovOptions& options) {
  if (state.n() != couplings.n()) throw Error(ErrorCode::DimensionMismatch, "state and couplings differ in N");
  XXZHamiltonian h(couplings, ext, options.cap);
  QuantumState out = state;
  krylov_propagate(h, out.amplitudes(), t, options);
  return out;
}

QuantumState evolve_dense(const QuantumState& state, const CouplingMatrix& couplings,
                          std::optional<ExternalField> ext, double t) {
  if (state.n() > 8) throw Error(ErrorCode::DomainError, "dense propagation limited to n <= 8");
  if (state.n() != couplings.n()) throw Error(ErrorCode::DimensionMismatch, "state and couplings differ in N");
  XXZHamiltonian h(couplings, ext);
  const std::size_t dim = h.dim();
  Eigen::MatrixXcd mat(dim, dim);
  std::vector<cplx> e(dim), col(dim);
  for (std::size_t b = 0; b < dim; ++b) {
    std::fill(e.begin(), e.end(), cplx(0.0));
    e[b] = 1.0;
    h.apply(e, col);
    for (std::size_t a = 0; a < dim; ++a) mat(a, b) = col[a];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(mat);
  Eigen::VectorXcd psi(dim);
  for (std::size_t a = 0; a < dim; ++a) psi[a] = state.amplitudes()[a];
  Eigen::VectorXcd coeff = es.eigenvectors().adjoint() * psi;
  for (std::size_t a = 0; a < dim; ++a) coeff[a] *= std::exp(cplx(0.0, -es.eigenvalues()[a] * t));
  const Eigen::VectorXcd out = es.eigenvectors() * coeff;
  return QuantumState(state.n(), std::vector<cplx>(out.data(), out.data() + dim));
}

// ---------------------------------------------------------------------------
// Observables

SpinMoments single_spin_moments(const QuantumState& state, unsigned i) {
  if (i >= state.n()) throw Error(ErrorCode::IndexOutOfRange, "spin index out of range");
  const auto amp = state.amplitudes();
  const std::size_t low = std::size_t{1} << i;
  double p_up = 0.0, p_down = 0.0;
  cplx coh = 0.0;  // <up|rho|down> = sum psi_up conj(psi_down)
  for (std::size_t base = 0; base < amp.size(); base += 2 * low) {
    for (std::size_t q = 0; q < low; ++q) {
      const cplx d = amp[base + q];
      const cplx u = amp[base + low + q];
      p_down += std::norm(d);
      p_up += std::norm(u);
      coh += u * std::conj(d);
    }
  }
  SpinMoments m;
  m.sz = 0.5 * (p_up - p_down);
  m.sx = coh.real();
  m.sy = -coh.imag();
  m.purity = p_up * p_up + p_down * p_down + 2.0 * std::norm(coh);
  return m;
}

Magnetization magnetization(const QuantumState& state, Axis axis) {
  Magnetization out;
  out.per_spin.resize(state.n());
  for (unsigned i = 0; i < state.n(); ++i) {
    const SpinMoments m = single_spin_moments(state, i);
    out.per_spin[i] = axis == Axis::X ? m.sx : axis == Axis::Y ? m.sy : m.sz;
  }
  if (state.n() > 0) {
    out.mean = std::accumulate(out.per_spin.begin(), out.per_spin.end(), 0.0) / state.n();
  }
  return out;
}

double renyi_entropy(const QuantumState& state, unsigned i) {
  const double purity = single_spin_moments(state, i).purity;
  return std::max(0.0, -std::log2(purity));
}

// ---------------------------------------------------------------------------
// Ramsey sequences

namespace {

struct PerSpinSeries {
  // [time][spin]
  std::vector<std::vector<double>> sx, sy, sz, entropy;
};

PerSpinSeries ramsey_exact(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                           std::span<const double> times, const KrylovOptions& krylov, bool with_entropy,
                           ExactDiagnostics* diag) {
  protocol.validate();
  const unsigned n = static_cast<unsigned>(couplings.n());
  const std::size_t nt = times.size();
  PerSpinSeries out;
  out.sx.assign(nt, std::vector<double>(n));
  out.sy = out.sx;
  out.sz = out.sx;
  if (with_entropy) out.entropy = out.sx;

  QuantumState state = protocol.include_pulses ? QuantumState::all_down(n) : QuantumState::x_polarized(n);
  std::optional<XXZHamiltonian> pulse_x, pulse_y;
  if (protocol.include_pulses) {
    pulse_x.emplace(couplings, protocol.pulse_field(0.0), krylov.cap);
    pulse_y.emplace(couplings, protocol.pulse_field(0.5 * std::numbers::pi), krylov.cap);
    krylov_propagate(*pulse_x, state.amplitudes(), protocol.pulse_duration(), krylov);
  }
  std::optional<ExternalField> free_ext;
  if (protocol.detuning != 0.0) free_ext = protocol.free_field();
  const XXZHamiltonian free(couplings, free_ext, krylov.cap);

  const double e0 = free.expectation(state.amplitudes());
  const double sz0 = magnetization(state, Axis::Z).mean;
  const double hscale = std::max(free.norm_bound(), 1e-300);
  double t_prev = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    if (times[k] < t_prev) throw Error(ErrorCode::DomainError, "times must be ascending and >= 0");
    krylov_propagate(free, state.amplitudes(), times[k] - t_prev, krylov);
    t_prev = times[k];
    for (unsigned i = 0; i < n; ++i) {
      const SpinMoments m = single_spin_moments(state, i);
      out.sz[k][i] = m.sz;
      out.sx[k][i] = m.sx;
      out.sy[k][i] = m.sy;
      if (with_entropy) out.entropy[k][i] = std::max(0.0, -std::log2(m.purity));
    }
    if (protocol.include_pulses) {
      QuantumState rx = state;
      krylov_propagate(*pulse_x, rx.amplitudes(), protocol.readout_duration(), krylov);
      QuantumState ry = state;
      krylov_propagate(*pulse_y, ry.amplitudes(), protocol.readout_duration(), krylov);
      for (unsigned i = 0; i < n; ++i) {
        out.sx[k][i] = single_spin_moments(rx, i).sz;
        out.sy[k][i] = single_spin_moments(ry, i).sz;
      }
    }
    if (diag) {
      diag->max_norm_drift = std::max(diag->max_norm_drift, std::abs(state.norm() - 1.0));
      diag->max_sz_drift = std::max(diag->max_sz_drift, std::abs(magnetization(state, Axis::Z).mean - sz0) * n);
      diag->max_energy_drift =
          std::max(diag->max_energy_drift, std::abs(free.expectation(state.amplitudes()) - e0) / hscale);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ObservableSeries run_exact(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                           std::span<const double> times, const ExactRunOptions& options,
                           ExactDiagnostics* diagnostics) {
  const PerSpinSeries ps = ramsey_exact(couplings, protocol, times, options.krylov, options.with_entropy, diagnostics);
  ObservableSeries s;
  s.times.assign(times.begin(), times.end());
  s.allocate(options.with_entropy);
  for (std::size_t k = 0; k < times.size(); ++k) {
    s.sx[k] = mean_of(ps.sx[k]);
    s.sy[k] = mean_of(ps.sy[k]);
    s.sz[k] = mean_of(ps.sz[k]);
    if (options.with_entropy) s.entropy[k] = mean_of(ps.entropy[k]);
  }
  return s;
}

std::vector<std::size_t> mace_cluster(const CouplingMatrix& couplings, std::size_t i, unsigned cluster_size) {
  const std::size_t n = couplings.n();
  if (i >= n) throw Error(ErrorCode::IndexOutOfRange, "spin index out of range");
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) others.push_back(j);
  }
  const std::size_t take = std::min<std::size_t>(cluster_size > 0 ? cluster_size - 1 : 0, others.size());
  std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take), others.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ja = std::abs(couplings(i, a));
                      const double jb = std::abs(couplings(i, b));
                      return ja != jb ? ja > jb : a < b;
                    });
  std::vector<std::size_t> cluster{i};
  cluster.insert(cluster.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take));
  return cluster;
}

ObservableSeries evolve_mace(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                             std::span<const double> times, const MaceOptions& options) {
  if (options.cluster_size < 1 || options.cluster_size > options.krylov.cap) {
    throw Error(ErrorCode::DomainError, "cluster size must be in [1, cap]");
  }
  const std::size_t n = couplings.n();
  ObservableSeries s;
  s.times.assign(times.begin(), times.end());
  s.allocate(false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cluster = mace_cluster(couplings, i, options.cluster_size);
    const CouplingMatrix sub = couplings.subset(cluster);
    const PerSpinSeries ps = ramsey_exact(sub, protocol, times, options.krylov, false, nullptr);
    for (std::size_t k = 0; k < times.size(); ++k) {
      s.sx[k] += ps.sx[k][0];
      s.sy[k] += ps.sy[k][0];
      s.sz[k] += ps.sz[k][0];
    }
  }
  for (std::size_t k = 0; k < times.size(); ++k) {
    s.sx[k] /= static_cast<double>(n);
    s.sy[k] /= static_cast<double>(n);
    s.sz[k] /= static_cast<double>(n);
  }
  return s;
}

}  // namespace xxz
