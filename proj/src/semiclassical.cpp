#include "xxz/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "xxz/error.hpp"
#include "xxz/kernels.hpp"
#include "xxz/parallel.hpp"
#include "xxz/rng.hpp"
#include "xxz/units.hpp"

namespace xxz {

// ---------------------------------------------------------------------------
// Ensemble

ClassicalSpinEnsemble::ClassicalSpinEnsemble(std::size_t n_spins, std::size_t n_traj, Scheme scheme)
    : n_spins_(n_spins), n_traj_(n_traj), scheme_(scheme), data_(3 * n_spins * n_traj, 0.0) {}

Vec3 ClassicalSpinEnsemble::spin(std::size_t traj, std::size_t i) const {
  if (traj >= n_traj_ || i >= n_spins_) throw Error(ErrorCode::IndexOutOfRange, "spin/trajectory index");
  const double* row = data_.data() + 3 * n_traj_ * i;
  return {row[traj], row[n_traj_ + traj], row[2 * n_traj_ + traj]};
}

void ClassicalSpinEnsemble::set_spin(std::size_t traj, std::size_t i, const Vec3& s) {
  if (traj >= n_traj_ || i >= n_spins_) throw Error(ErrorCode::IndexOutOfRange, "spin/trajectory index");
  double* row = data_.data() + 3 * n_traj_ * i;
  row[traj] = s.x;
  row[n_traj_ + traj] = s.y;
  row[2 * n_traj_ + traj] = s.z;
}

ClassicalSpinEnsemble sample_dtwa_initial(std::size_t n_spins, InitialAxis axis, std::size_t n_traj,
                                          std::uint64_t seed) {
  if (n_traj < 1) throw Error(ErrorCode::DomainError, "n_traj must be >= 1");
  ClassicalSpinEnsemble e(n_spins, n_traj, Scheme::DTWA);
  Rng rng(seed);
  // Draw order: trajectory-major, then spin, then the two transverse coins.
  for (std::size_t t = 0; t < n_traj; ++t) {
    for (std::size_t i = 0; i < n_spins; ++i) {
      const double a = rng.coin() ? 0.5 : -0.5;
      const double b = rng.coin() ? 0.5 : -0.5;
      e.set_spin(t, i, axis == InitialAxis::PlusX ? Vec3{0.5, a, b} : Vec3{a, b, -0.5});
    }
  }
  return e;
}

ClassicalSpinEnsemble mean_field_initial(std::size_t n_spins, InitialAxis axis) {
  ClassicalSpinEnsemble e(n_spins, 1, Scheme::MeanField);
  const Vec3 s = axis == InitialAxis::PlusX ? Vec3{0.5, 0.0, 0.0} : Vec3{0.0, 0.0, -0.5};
  for (std::size_t i = 0; i < n_spins; ++i) e.set_spin(0, i, s);
  return e;
}

Vec3 drive_vector(const CouplingMatrix& couplings, const std::optional<ExternalField>& ext) {
  Vec3 w{0.0, 0.0, couplings.sz_field()};
  if (ext) {
    w.x += ext->rabi * std::sin(ext->phase);
    w.y -= ext->rabi * std::cos(ext->phase);
    w.z += ext->detuning;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Right-hand side on one block

namespace {

// ds/dt = (2 pi dH/ds) x s = s x (-2 pi dH/ds).
class BlockRhs {
 public:
  BlockRhs(const CouplingMatrix& c, const std::optional<ExternalField>& ext, std::size_t lanes)
      : c_(c), lanes_(lanes), b_(3 * c.n() * lanes) {
    const Vec3 w = drive_vector(c, ext);
    p_.cxy = c.ising() ? 0.0 : -kTwoPi;
    p_.cz = -kTwoPi * c.delta();
    p_.ex = -angular(w.x);
    p_.ey = -angular(w.y);
    p_.ez = -angular(w.z);
  }

  void operator()(std::span<const double> s, std::span<double> ds) {
    const auto& k = kernels::active();
    const std::size_t n = c_.n();
    k.field(n, 3 * lanes_, c_.data().data(), s.data(), b_.data());
    k.torque(n, lanes_, s.data(), b_.data(), p_, ds.data());
  }

 private:
  const CouplingMatrix& c_;
  std::size_t lanes_;
  std::vector<double> b_;
  kernels::TorqueParams p_;
};

void check_dims(const ClassicalSpinEnsemble& s, const CouplingMatrix& c) {
  if (s.n_spins() != c.n()) throw Error(ErrorCode::DimensionMismatch, "ensemble and couplings differ in N");
}

}  // namespace

ClassicalSpinEnsemble equations_of_motion(const ClassicalSpinEnsemble& spins, const CouplingMatrix& couplings,
                                          const std::optional<ExternalField>& ext) {
  check_dims(spins, couplings);
  ClassicalSpinEnsemble d(spins.n_spins(), spins.n_traj(), spins.scheme());
  BlockRhs rhs(couplings, ext, spins.n_traj());
  rhs(spins.data(), d.data());
  return d;
}

double classical_energy(const ClassicalSpinEnsemble& spins, std::size_t traj, const CouplingMatrix& couplings,
                        const std::optional<ExternalField>& ext) {
  check_dims(spins, couplings);
  const std::size_t n = spins.n_spins();
  const double dxy = couplings.ising() ? 0.0 : 1.0;
  const double dz = couplings.delta();
  const Vec3 w = drive_vector(couplings, ext);
  std::vector<Vec3> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = spins.spin(traj, i);
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double jij = couplings(i, j);
      if (jij == 0.0) continue;
      row += jij * (dxy * (s[i].x * s[j].x + s[i].y * s[j].y) + dz * s[i].z * s[j].z);
    }
    e += row + w.dot(s[i]);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Tsit5

namespace {

constexpr double c2 = 0.161, c3 = 0.327, c4 = 0.9, c5 = 0.9800255409045097;
constexpr double a21 = 0.161;
constexpr double a31 = -0.008480655492356989, a32 = 0.335480655492357;
constexpr double a41 = 2.897153057105493, a42 = -6.359448489975075, a43 = 4.3622954328695815;
constexpr double a51 = 5.325864828439257, a52 = -11.748883564062828, a53 = 7.4955393428898365,
                 a54 = -0.09249506636175525;
constexpr double a61 = 5.86145544294642, a62 = -12.92096931784711, a63 = 8.159367898576159,
                 a64 = -0.071584973281401, a65 = -0.028269050394068383;
constexpr double b1 = 0.09646076681806523, b2 = 0.01, b3 = 0.4798896504144996, b4 = 1.379008574103742,
                 b5 = -3.290069515436081, b6 = 2.324710524099774;
// Error weights: b - b_hat.
constexpr double e1 = -0.00178001105222577714, e2 = -0.0008164344596567469, e3 = 0.007880878010261995,
                 e4 = -0.1447110071732629, e5 = 0.5823571654525552, e6 = -0.45808210592918697,
                 e7 = 1.0 / 66.0;

constexpr double kSafety = 0.9;
constexpr double kAlpha = 0.7 / 5.0;
constexpr double kBeta = 0.4 / 5.0;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

}  // namespace

Tsit5::Tsit5(Rhs rhs, std::size_t dim, IntegratorOptions options) : rhs_(std::move(rhs)), dim_(dim), opt_(options) {
  if (!(opt_.rtol > 0.0) || !(opt_.atol > 0.0)) throw Error(ErrorCode::DomainError, "tolerances must be > 0");
  for (auto& k : k_) k.resize(dim);
  ytmp_.resize(dim);
  ynew_.resize(dim);
  yerr_.resize(dim);
}

double Tsit5::initial_step(std::span<const double> y, double t0, double t_end) {
  // Hairer-Wanner starting step heuristic.
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t q = 0; q < dim_; ++q) {
    const double sc = opt_.atol + opt_.rtol * std::abs(y[q]);
    d0 += (y[q] / sc) * (y[q] / sc);
    d1 += (k_[0][q] / sc) * (k_[0][q] / sc);
  }
  d0 = std::sqrt(d0 / dim_);
  d1 = std::sqrt(d1 / dim_);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, t_end - t0);
  for (std::size_t q = 0; q < dim_; ++q) ytmp_[q] = y[q] + h0 * k_[0][q];
  rhs_(t0 + h0, ytmp_, k_[1]);
  ++stats_.rhs_evals;
  double d2 = 0.0;
  for (std::size_t q = 0; q < dim_; ++q) {
    const double sc = opt_.atol + opt_.rtol * std::abs(y[q]);
    const double v = (k_[1][q] - k_[0][q]) / sc;
    d2 += v * v;
  }
  d2 = std::sqrt(d2 / dim_) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min(100.0 * h0, h1);
}

void Tsit5::advance(std::span<double> y, double t0, double t1) {
  if (y.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "state dimension");
  if (t1 < t0) throw Error(ErrorCode::DomainError, "integration span must be non-negative");
  if (t1 == t0) return;
  if (!have_k1_ || t_k1_ != t0) {
    rhs_(t0, y, k_[0]);
    ++stats_.rhs_evals;
    have_k1_ = true;
  }
  if (h_ <= 0.0) h_ = initial_step(y, t0, t1);

  double t = t0;
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > opt_.max_steps) throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted");
    const double remaining = t1 - t;
    const bool last = h_ >= remaining * (1.0 - 1e-12);
    const double h = last ? remaining : h_;
    const std::size_t n = dim_;
    const double* y0 = y.data();
    double* yt = ytmp_.data();
    const double *k1 = k_[0].data(), *k2 = k_[1].data(), *k3 = k_[2].data(), *k4 = k_[3].data(),
                 *k5 = k_[4].data(), *k6 = k_[5].data();

    for (std::size_t q = 0; q < n; ++q) yt[q] = y0[q] + h * a21 * k1[q];
    rhs_(t + c2 * h, ytmp_, k_[1]);
    for (std::size_t q = 0; q < n; ++q) yt[q] = y0[q] + h * (a31 * k1[q] + a32 * k2[q]);
    rhs_(t + c3 * h, ytmp_, k_[2]);
    for (std::size_t q = 0; q < n; ++q) yt[q] = y0[q] + h * (a41 * k1[q] + a42 * k2[q] + a43 * k3[q]);
    rhs_(t + c4 * h, ytmp_, k_[3]);
    for (std::size_t q = 0; q < n; ++q) {
      yt[q] = y0[q] + h * (a51 * k1[q] + a52 * k2[q] + a53 * k3[q] + a54 * k4[q]);
    }
    rhs_(t + c5 * h, ytmp_, k_[4]);
    for (std::size_t q = 0; q < n; ++q) {
      yt[q] = y0[q] + h * (a61 * k1[q] + a62 * k2[q] + a63 * k3[q] + a64 * k4[q] + a65 * k5[q]);
    }
    rhs_(t + h, ytmp_, k_[5]);
    double* yn = ynew_.data();
    for (std::size_t q = 0; q < n; ++q) {
      yn[q] = y0[q] + h * (b1 * k1[q] + b2 * k2[q] + b3 * k3[q] + b4 * k4[q] + b5 * k5[q] + b6 * k6[q]);
    }
    rhs_(t + h, ynew_, k_[6]);
    stats_.rhs_evals += 6;
    const double* k7 = k_[6].data();
    double acc = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      const double err =
          h * (e1 * k1[q] + e2 * k2[q] + e3 * k3[q] + e4 * k4[q] + e5 * k5[q] + e6 * k6[q] + e7 * k7[q]);
      const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y0[q]), std::abs(yn[q]));
      acc += (err / sc) * (err / sc);
    }
    const double err = std::sqrt(acc / static_cast<double>(n));

    if (err <= 1.0) {
      const double e = std::max(err, 1e-10);
      double factor = kSafety * std::pow(e, -kAlpha) * std::pow(err_prev_, kBeta);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      err_prev_ = std::max(err, 1e-4);
      std::copy(ynew_.begin(), ynew_.end(), y.begin());
      std::swap(k_[0], k_[6]);
      t = last ? t1 : t + h;
      // A clipped final step does not shrink the carried proposal.
      h_ = last ? std::max(h_, h * factor) : h * factor;
      ++stats_.accepted;
    } else {
      const double factor =
          std::isfinite(err) ? std::max(kMinFactor, kSafety * std::pow(err, -kAlpha)) : kMinFactor;
      h_ = h * factor;
      ++stats_.rejected;
    }
    if (h_ < opt_.min_step) {
      throw Error(ErrorCode::StepSizeUnderflow, "step size fell below the configured minimum");
    }
  }
  t_k1_ = t1;
}

void integrate(ClassicalSpinEnsemble& spins, const CouplingMatrix& couplings,
               const std::optional<ExternalField>& ext, double t_span, const IntegratorOptions& options,
               IntegratorStats* stats) {
  check_dims(spins, couplings);
  if (t_span < 0.0) throw Error(ErrorCode::DomainError, "negative time span");
  BlockRhs rhs(couplings, ext, spins.n_traj());
  Tsit5 solver([&](double, std::span<const double> y, std::span<double> dy) { rhs(y, dy); }, spins.data().size(),
               options);
  solver.advance(spins.data(), 0.0, t_span);
  if (stats) {
    stats->accepted += solver.stats().accepted;
    stats->rejected += solver.stats().rejected;
    stats->rhs_evals += solver.stats().rhs_evals;
  }
}

// ---------------------------------------------------------------------------
// Ramsey runs

void SemiclassicalDiagnostics::merge(const SemiclassicalDiagnostics& o) {
  max_norm_drift = std::max(max_norm_drift, o.max_norm_drift);
  max_energy_drift = std::max(max_energy_drift, o.max_energy_drift);
  accepted_steps += o.accepted_steps;
  rejected_steps += o.rejected_steps;
}

namespace {

// Per-trajectory spin-averaged components at each output time, index
// [time][traj] per component.
struct BlockResult {
  std::vector<std::vector<double>> sx, sy, sz;
  SemiclassicalDiagnostics diag;
};

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += v[k];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

// Mean over spins of one component for each lane.
void spin_average(const ClassicalSpinEnsemble& e, int component, std::vector<double>& out) {
  const std::size_t lanes = e.n_traj();
  const std::size_t n = e.n_spins();
  out.assign(lanes, 0.0);
  std::vector<double> column(n);
  const auto d = e.data();
  for (std::size_t t = 0; t < lanes; ++t) {
    for (std::size_t i = 0; i < n; ++i) column[i] = d[3 * lanes * i + component * lanes + t];
    out[t] = pairwise_sum(column.data(), n) / static_cast<double>(n);
  }
}

double energy_scale(const CouplingMatrix& c) {
  double s = 0.0;
  for (double v : c.data()) s += std::abs(v);
  return 0.125 * s;  // sum_{i<j} |J_ij| / 4
}

BlockResult run_block(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                      std::span<const double> times, ClassicalSpinEnsemble spins, const IntegratorOptions& opts) {
  const std::size_t lanes = spins.n_traj();
  const std::size_t n = spins.n_spins();
  const std::size_t nt = times.size();
  BlockResult r;
  r.sx.assign(nt, std::vector<double>(lanes));
  r.sy = r.sx;
  r.sz = r.sx;

  std::vector<double> norm0(n * lanes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < lanes; ++t) norm0[i * lanes + t] = spins.spin(t, i).norm();
  }
  auto track_norms = [&](const ClassicalSpinEnsemble& e) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < lanes; ++t) {
        r.diag.max_norm_drift = std::max(r.diag.max_norm_drift, std::abs(e.spin(t, i).norm() - norm0[i * lanes + t]));
      }
    }
  };
  auto absorb = [&](const Tsit5& s) {
    r.diag.accepted_steps += s.stats().accepted;
    r.diag.rejected_steps += s.stats().rejected;
  };
  auto make_solver = [&](const std::optional<ExternalField>& ext) {
    auto rhs = std::make_shared<BlockRhs>(couplings, ext, lanes);
    return Tsit5([rhs](double, std::span<const double> y, std::span<double> dy) { (*rhs)(y, dy); },
                 spins.data().size(), opts);
  };

  if (protocol.include_pulses) {
    Tsit5 pulse = make_solver(protocol.pulse_field(0.0));
    pulse.advance(spins.data(), 0.0, protocol.pulse_duration());
    absorb(pulse);
    track_norms(spins);
  }
  std::optional<ExternalField> free_ext;
  if (protocol.detuning != 0.0) free_ext = protocol.free_field();
  Tsit5 free = make_solver(free_ext);
  std::optional<Tsit5> read_x, read_y;
  if (protocol.include_pulses) {
    read_x.emplace(make_solver(protocol.pulse_field(0.0)));
    read_y.emplace(make_solver(protocol.pulse_field(0.5 * std::numbers::pi)));
  }

  std::vector<double> e0(lanes);
  for (std::size_t t = 0; t < lanes; ++t) e0[t] = classical_energy(spins, t, couplings, free_ext);
  // A single trajectory's energy can cancel to near zero, so drifts are taken
  // relative to at least the polarized-state energy sum_{i<j} |J_ij| / 4.
  const double escale_floor = std::max(energy_scale(couplings), 1e-300);

  double t_prev = 0.0;
  std::vector<double> avg;
  for (std::size_t k = 0; k < nt; ++k) {
    if (times[k] < t_prev) throw Error(ErrorCode::DomainError, "times must be ascending and >= 0");
    free.advance(spins.data(), t_prev, times[k]);
    t_prev = times[k];
    track_norms(spins);
    for (std::size_t t = 0; t < lanes; ++t) {
      const double e = classical_energy(spins, t, couplings, free_ext);
      const double ref = std::max(std::abs(e0[t]), escale_floor);
      r.diag.max_energy_drift = std::max(r.diag.max_energy_drift, std::abs(e - e0[t]) / ref);
    }
    spin_average(spins, 2, avg);
    r.sz[k] = avg;
    if (protocol.include_pulses) {
      ClassicalSpinEnsemble rx = spins;
      read_x->reset_step();
      read_x->advance(rx.data(), 0.0, protocol.readout_duration());
      spin_average(rx, 2, avg);
      r.sx[k] = avg;
      ClassicalSpinEnsemble ry = spins;
      read_y->reset_step();
      read_y->advance(ry.data(), 0.0, protocol.readout_duration());
      spin_average(ry, 2, avg);
      r.sy[k] = avg;
    } else {
      spin_average(spins, 0, avg);
      r.sx[k] = avg;
      spin_average(spins, 1, avg);
      r.sy[k] = avg;
    }
  }
  absorb(free);
  if (read_x) absorb(*read_x);
  if (read_y) absorb(*read_y);
  return r;
}

void mean_and_error(const std::vector<double>& v, double& mean, double& err) {
  const std::size_t n = v.size();
  mean = pairwise_sum(v.data(), n) / static_cast<double>(n);
  if (n < 2) {
    err = 0.0;
    return;
  }
  std::vector<double> sq(n);
  for (std::size_t k = 0; k < n; ++k) sq[k] = (v[k] - mean) * (v[k] - mean);
  const double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
  err = std::sqrt(var / static_cast<double>(n));
}

}  // namespace

ObservableSeries run_dtwa(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                          std::span<const double> times, const SemiclassicalOptions& options,
                          SemiclassicalDiagnostics* diagnostics) {
  protocol.validate();
  if (options.n_traj < 1) throw Error(ErrorCode::DomainError, "n_traj must be >= 1");
  if (options.block_size < 1) throw Error(ErrorCode::DomainError, "block_size must be >= 1");
  const std::size_t n = couplings.n();
  const std::size_t n_blocks = (options.n_traj + options.block_size - 1) / options.block_size;
  const InitialAxis axis = protocol.include_pulses ? InitialAxis::MinusZ : InitialAxis::PlusX;

  std::vector<BlockResult> blocks(n_blocks);
  parallel_for(n_blocks, options.workers, [&](std::size_t b) {
    const std::size_t first = b * options.block_size;
    const std::size_t lanes = std::min(options.block_size, options.n_traj - first);
    ClassicalSpinEnsemble init = sample_dtwa_initial(n, axis, lanes, derive_seed(options.seed, {0x64747761, b}));
    blocks[b] = run_block(couplings, protocol, times, std::move(init), options.integrator);
  });

  ObservableSeries s;
  s.times.assign(times.begin(), times.end());
  s.allocate(false);
  std::vector<double> vx, vy, vz;
  for (std::size_t k = 0; k < times.size(); ++k) {
    vx.clear();
    vy.clear();
    vz.clear();
    for (const auto& blk : blocks) {
      vx.insert(vx.end(), blk.sx[k].begin(), blk.sx[k].end());
      vy.insert(vy.end(), blk.sy[k].begin(), blk.sy[k].end());
      vz.insert(vz.end(), blk.sz[k].begin(), blk.sz[k].end());
    }
    mean_and_error(vx, s.sx[k], s.sx_err[k]);
    mean_and_error(vy, s.sy[k], s.sy_err[k]);
    mean_and_error(vz, s.sz[k], s.sz_err[k]);
  }
  if (diagnostics) {
    for (const auto& blk : blocks) diagnostics->merge(blk.diag);
  }
  return s;
}

ObservableSeries run_mean_field(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                                std::span<const double> times, const IntegratorOptions& options,
                                SemiclassicalDiagnostics* diagnostics) {
  protocol.validate();
  const InitialAxis axis = protocol.include_pulses ? InitialAxis::MinusZ : InitialAxis::PlusX;
  BlockResult r = run_block(couplings, protocol, times, mean_field_initial(couplings.n(), axis), options);
  ObservableSeries s;
  s.times.assign(times.begin(), times.end());
  s.allocate(false);
  for (std::size_t k = 0; k < times.size(); ++k) {
    s.sx[k] = r.sx[k][0];
    s.sy[k] = r.sy[k][0];
    s.sz[k] = r.sz[k][0];
  }
  if (diagnostics) diagnostics->merge(r.diag);
  return s;
}

ObservableSeries emch_radin_ising(const CouplingMatrix& couplings, std::span<const double> times) {
  const std::size_t n = couplings.n();
  ObservableSeries s;
  s.times.assign(times.begin(), times.end());
  s.allocate(false);
  const double hz = angular(couplings.sz_field());
  std::vector<double> per(n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    for (std::size_t i = 0; i < n; ++i) {
      double p = 0.5;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) p *= std::cos(0.5 * angular(couplings.delta() * couplings(i, j)) * t);
      }
      per[i] = p;
    }
    const double m = n ? pairwise_sum(per.data(), n) / static_cast<double>(n) : 0.0;
    s.sx[k] = m * std::cos(hz * t);
    s.sy[k] = m * std::sin(hz * t);
  }
  return s;
}

}  // namespace xxz
