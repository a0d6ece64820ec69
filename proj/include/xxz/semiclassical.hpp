#pragma once

// Classical spin dynamics: mean-field and discrete truncated Wigner (dTWA).
//
// Each spin obeys the Heisenberg equation of its classical Hamiltonian
//   H_C = sum_{i<j} J_ij (sx sx + sy sy + delta sz sz) + sum_i w . s_i,
// i.e. ds_i/dt = 2*pi * (dH_C/ds_i) x s_i, with w the uniform drive vector.
// Trajectories are stored in blocks: row i of a block holds
// [x(lanes) | y(lanes) | z(lanes)] for spin i.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "xxz/couplings.hpp"
#include "xxz/geometry.hpp"
#include "xxz/observables.hpp"
#include "xxz/protocol.hpp"

namespace xxz {

enum class Scheme { MeanField, DTWA };

// Initial polarization axis: +x (ideal first pulse) or -z (before the pulse).
enum class InitialAxis { PlusX, MinusZ };

class ClassicalSpinEnsemble {
 public:
  ClassicalSpinEnsemble() = default;
  ClassicalSpinEnsemble(std::size_t n_spins, std::size_t n_traj, Scheme scheme);

  std::size_t n_spins() const { return n_spins_; }
  std::size_t n_traj() const { return n_traj_; }
  Scheme scheme() const { return scheme_; }

  Vec3 spin(std::size_t traj, std::size_t i) const;
  void set_spin(std::size_t traj, std::size_t i, const Vec3& s);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

 private:
  std::size_t n_spins_ = 0;
  std::size_t n_traj_ = 0;
  Scheme scheme_ = Scheme::DTWA;
  std::vector<double> data_;
};

// Per spin: the component along `axis` is fixed at +-1/2 (+1/2 for +x, -1/2
// for -z), the two transverse components are independent fair +-1/2 coins.
ClassicalSpinEnsemble sample_dtwa_initial(std::size_t n_spins, InitialAxis axis, std::size_t n_traj,
                                          std::uint64_t seed);

// One trajectory with every spin of length 1/2 along `axis`.
ClassicalSpinEnsemble mean_field_initial(std::size_t n_spins, InitialAxis axis);

// Drive vector w (MHz, nu) entering H_C: Omega (sin phi, -cos phi, 0) + (0, 0, Delta + sz_field).
Vec3 drive_vector(const CouplingMatrix& couplings, const std::optional<ExternalField>& ext);

// Time derivatives of every spin. Throws DimensionMismatch.
ClassicalSpinEnsemble equations_of_motion(const ClassicalSpinEnsemble& spins, const CouplingMatrix& couplings,
                                          const std::optional<ExternalField>& ext = std::nullopt);

// H_C of one trajectory, MHz (nu).
double classical_energy(const ClassicalSpinEnsemble& spins, std::size_t traj, const CouplingMatrix& couplings,
                        const std::optional<ExternalField>& ext = std::nullopt);

struct IntegratorOptions {
  // Tight enough that relative energy drift stays below 1e-8 over ~100/J_mf
  // for a few hundred spins.
  double rtol = 1e-11;
  double atol = 1e-13;
  double min_step = 1e-13;        // us; smaller accepted-step requests throw StepSizeUnderflow
  std::size_t max_steps = 100'000'000;
};

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

// Tsitouras 5(4) embedded Runge-Kutta with FSAL and PI step control for a
// generic system y' = f(t, y).
class Tsit5 {
 public:
  using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

  Tsit5(Rhs rhs, std::size_t dim, IntegratorOptions options);

  // Advances y from t0 to t1 (t1 >= t0). The step-size proposal carries over
  // between calls on the same instance.
  void advance(std::span<double> y, double t0, double t1);
  void reset_step() { h_ = 0.0; have_k1_ = false; }

  const IntegratorStats& stats() const { return stats_; }

 private:
  double initial_step(std::span<const double> y, double t0, double t_end);

  Rhs rhs_;
  std::size_t dim_;
  IntegratorOptions opt_;
  IntegratorStats stats_;
  double h_ = 0.0;
  double err_prev_ = 1e-4;
  bool have_k1_ = false;
  double t_k1_ = 0.0;
  std::vector<double> k_[7];
  std::vector<double> ytmp_, ynew_, yerr_;
};

// Evolves every trajectory of the ensemble for t_span us under a constant drive.
void integrate(ClassicalSpinEnsemble& spins, const CouplingMatrix& couplings,
               const std::optional<ExternalField>& ext, double t_span, const IntegratorOptions& options = {},
               IntegratorStats* stats = nullptr);

struct SemiclassicalOptions {
  std::size_t n_traj = 100;
  std::uint64_t seed = 1;
  IntegratorOptions integrator;
  unsigned workers = 1;
  // Trajectories integrated together as one system. Fixed independently of
  // the worker count so results do not depend on scheduling.
  std::size_t block_size = 16;
};

struct SemiclassicalDiagnostics {
  double max_norm_drift = 0.0;    // max | |s_i(t)| - |s_i(0)| |
  // max |H_C(t) - H_C(0)| / max(|H_C(0)|, sum_{i<j} |J_ij| / 4) during free evolution
  double max_energy_drift = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  void merge(const SemiclassicalDiagnostics& other);
};

// Full Ramsey sequence averaged over sampled trajectories. Errors are
// standard errors of the per-trajectory spin-averaged values.
ObservableSeries run_dtwa(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                          std::span<const double> times, const SemiclassicalOptions& options = {},
                          SemiclassicalDiagnostics* diagnostics = nullptr);

// Single unsampled trajectory through the same sequence.
ObservableSeries run_mean_field(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                                std::span<const double> times, const IntegratorOptions& options = {},
                                SemiclassicalDiagnostics* diagnostics = nullptr);

// Ising dephasing in closed form: <Sx_i> = 1/2 prod_j cos(Jz_ij t / 2) with
// Jz_ij = 2 pi delta J_ij, rotated by the uniform Sz field if present.
ObservableSeries emch_radin_ising(const CouplingMatrix& couplings, std::span<const double> times);

}  // namespace xxz
