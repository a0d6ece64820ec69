#pragma once

// Exact state-vector dynamics for small clusters.
//
// Basis convention (shared by every routine here): amplitude index b is a
// bitstring with bit i describing spin i, little-endian, 1 = up (Sz = +1/2).

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "xxz/couplings.hpp"
#include "xxz/observables.hpp"
#include "xxz/protocol.hpp"

namespace xxz {

using cplx = std::complex<double>;

inline constexpr unsigned kDefaultExactCap = 14;

class QuantumState {
 public:
  QuantumState() = default;
  QuantumState(unsigned n, std::vector<cplx> amplitudes);

  static QuantumState x_polarized(unsigned n);  // |->^N along +x
  static QuantumState all_up(unsigned n);
  static QuantumState all_down(unsigned n);

  unsigned n() const { return n_; }
  std::size_t dim() const { return amp_.size(); }
  std::span<cplx> amplitudes() { return amp_; }
  std::span<const cplx> amplitudes() const { return amp_; }
  double norm() const;

 private:
  unsigned n_ = 0;
  std::vector<cplx> amp_;
};

// Matrix-free XXZ (+ optional drive) Hamiltonian in angular units (rad/us).
class XXZHamiltonian {
 public:
  XXZHamiltonian(const CouplingMatrix& couplings, std::optional<ExternalField> ext = std::nullopt,
                 unsigned cap = kDefaultExactCap);

  unsigned n() const { return n_; }
  std::size_t dim() const { return diag_.size(); }
  void apply(std::span<const cplx> in, std::span<cplx> out) const;
  double expectation(std::span<const cplx> psi) const;
  // Upper bound on the spectral radius.
  double norm_bound() const { return norm_bound_; }

 private:
  struct Pair {
    unsigned i;
    unsigned j;
    double c;  // flip-flop amplitude J_ij/2 in rad/us
  };
  unsigned n_ = 0;
  std::vector<double> diag_;
  std::vector<Pair> pairs_;
  cplx up_from_down_{};  // <up|h|down> of the single-spin drive
  bool has_drive_ = false;
  double norm_bound_ = 0.0;
};

QuantumState apply_hamiltonian(const QuantumState& state, const CouplingMatrix& couplings,
                               std::optional<ExternalField> ext = std::nullopt);

struct KrylovOptions {
  double tol = 1e-10;      // 2-norm error budget for one evolve call
  unsigned max_dim = 40;   // Krylov subspace cap
  unsigned cap = kDefaultExactCap;
};

struct KrylovStats {
  std::size_t substeps = 0;
  std::size_t matvecs = 0;
};

// In-place Lanczos propagation psi <- exp(-i H t) psi with adaptive
// substeps. Throws ConvergenceFailure when the error estimate cannot be met.
void krylov_propagate(const XXZHamiltonian& h, std::span<cplx> psi, double t, const KrylovOptions& options,
                      KrylovStats* stats = nullptr);

QuantumState evolve_exact(const QuantumState& state, const CouplingMatrix& couplings,
                          std::optional<ExternalField> ext, double t, const KrylovOptions& options = {});

// Dense eigendecomposition propagator for n <= 8 (reference path).
QuantumState evolve_dense(const QuantumState& state, const CouplingMatrix& couplings,
                          std::optional<ExternalField> ext, double t);

enum class Axis { X, Y, Z };

struct SpinMoments {
  double sx = 0.0;
  double sy = 0.0;
  double sz = 0.0;
  double purity = 1.0;  // Tr rho_i^2
};

SpinMoments single_spin_moments(const QuantumState& state, unsigned i);

struct Magnetization {
  std::vector<double> per_spin;
  double mean = 0.0;
};

Magnetization magnetization(const QuantumState& state, Axis axis);

// -log2 Tr rho_i^2 of the reduced state of spin i.
double renyi_entropy(const QuantumState& state, unsigned i);

struct ExactRunOptions {
  KrylovOptions krylov;
  bool with_entropy = true;
};

struct ExactDiagnostics {
  double max_norm_drift = 0.0;   // | ||psi|| - 1 |
  double max_sz_drift = 0.0;     // total Sz drift during free evolution (no drive)
  double max_energy_drift = 0.0; // relative <H> drift during free evolution
};

// Full Ramsey sequence on one configuration; Sx/Sy are the readout values
// <S_phi> at phi = 0 and pi/2, Sz is measured before the readout pulse.
ObservableSeries run_exact(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                           std::span<const double> times, const ExactRunOptions& options = {},
                           ExactDiagnostics* diagnostics = nullptr);

struct MaceOptions {
  unsigned cluster_size = 6;
  KrylovOptions krylov;
};

// Cluster of spin i: i itself plus its cluster_size - 1 strongest partners,
// ties broken by lower index. Spin i is first in the returned list.
std::vector<std::size_t> mace_cluster(const CouplingMatrix& couplings, std::size_t i, unsigned cluster_size);

ObservableSeries evolve_mace(const CouplingMatrix& couplings, const RamseyProtocol& protocol,
                             std::span<const double> times, const MaceOptions& options = {});

}  // namespace xxz
