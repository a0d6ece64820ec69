#pragma once

// XXZ coupling matrices J_ij = C6 / r_ij^6 and the mapping from two-atom
// pair-state matrix elements to spin-model parameters.
//
// Counting convention: the Hamiltonian is written with a prefactor 1/2 and an
// unrestricted double sum over (i, j). Here every unordered pair is stored
// symmetrically but summed ONCE (i < j) with the 1/2 absorbed:
//
//   H = sum_{i<j} J_ij (Sx Sx + Sy Sy + delta Sz Sz)
//
// so a single pair with coupling J has flip-flop matrix element J/2.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "xxz/disorder.hpp"

namespace xxz {

struct XXZParameters {
  double c6 = 59000.0;     // MHz * um^6 (nu)
  double delta = -0.73;    // anisotropy
  double delta_vdw = 0.0;  // MHz (nu), single-spin detuning
  bool include_detuning = false;
  // Drop the flip-flop channel and keep only delta * Sz Sz (Ising limit).
  bool ising = false;
  // Pairs farther apart than this are dropped. Performance experiments only.
  std::optional<double> truncation_radius;

  void validate() const;
};

class CouplingMatrix {
 public:
  CouplingMatrix() = default;
  // Builds from an explicit symmetric matrix (row-major n x n, MHz nu).
  CouplingMatrix(std::size_t n, std::vector<double> j, double delta);

  std::size_t n() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return j_[i * n_ + j]; }
  std::span<const double> data() const { return j_; }
  double delta() const { return delta_; }
  double j_max() const { return j_max_; }
  double j_mf_median() const { return j_mf_median_; }
  bool ising() const { return ising_; }
  // Uniform Sz field (MHz nu) implied by the van der Waals detuning, or 0.
  double sz_field() const { return sz_field_; }
  double c6() const { return c6_; }

  void set_ising(bool on) { ising_ = on; }
  void set_sz_field(double f) { sz_field_ = f; }
  void set_c6(double c6) { c6_ = c6; }

  // Restriction to the listed spins, in the listed order.
  CouplingMatrix subset(std::span<const std::size_t> indices) const;

 private:
  void refresh_cache();

  std::size_t n_ = 0;
  std::vector<double> j_;
  double delta_ = 0.0;
  double j_max_ = 0.0;
  double j_mf_median_ = 0.0;
  double sz_field_ = 0.0;
  double c6_ = 0.0;
  bool ising_ = false;
};

CouplingMatrix build_coupling_matrix(const SpinConfiguration& config, const XXZParameters& params);

struct PairMatrixElements {
  double e_uu = 0.0;  // <up up|H|up up>
  double e_du = 0.0;  // <down up|H|down up> = <up down|H|up down>
  double e_dd = 0.0;  // <down down|H|down down>
  double j_ex = 0.0;  // <up down|H|down up>
};

struct PairXXZ {
  double j = 0.0;
  double delta = 0.0;
  double delta_vdw = 0.0;
};

// J = 2 J_ex, delta = (E_dd + E_uu - 2 E_du) / J, Delta_vdW = (E_dd - E_uu) / 2.
PairXXZ pair_to_xxz(const PairMatrixElements& elements);

// The 4x4 pair Hamiltonian in the basis (uu, ud, du, dd) generated by
// J (Sx Sx + Sy Sy + delta Sz Sz) - Delta_vdW (Sz1 + Sz2) + offset. The sign
// of the single-spin term makes pair_to_xxz its inverse up to the offset.
std::array<std::array<double, 4>, 4> pair_hamiltonian(const PairXXZ& p, double offset = 0.0);

void write_coupling_matrix(std::ostream& os, const CouplingMatrix& m);
CouplingMatrix read_coupling_matrix(std::istream& is);

}  // namespace xxz
