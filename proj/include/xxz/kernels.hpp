#pragma once

// Data-parallel inner loops shared by the exact and semiclassical engines.
//
// Each kernel has a portable scalar reference implementation and an AVX2+FMA
// variant. The variant is picked once at startup from CPUID, can be forced
// with the XXZ_ISA environment variable ("scalar" or "avx2"), and is
// equivalence-tested against the reference. Complex arrays are passed as
// interleaved (re, im) doubles, i.e. std::complex<double> storage.

#include <cstddef>
#include <string_view>

namespace xxz::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

struct TorqueParams {
  double cxy = 0.0;  // scale applied to bx, by (2*pi for XXZ, 0 for Ising mode)
  double cz = 0.0;   // scale applied to bz (2*pi*delta)
  double ex = 0.0;   // uniform external field, rad/us
  double ey = 0.0;
  double ez = 0.0;
};

struct KernelTable {
  Isa isa;

  // y += a * x over n doubles.
  void (*axpy)(std::size_t n, double a, const double* x, double* y);

  // Complex y += (ar + i ai) * x over n complex entries.
  void (*caxpy)(std::size_t n, double ar, double ai, const double* x, double* y);

  // Complex <x|y> = sum conj(x_k) y_k over n complex entries.
  void (*cdot)(std::size_t n, const double* x, const double* y, double* re, double* im);

  // out_k = d_k * in_k, d real, in/out complex, n entries.
  void (*diag_mul)(std::size_t n, const double* d, const double* in, double* out);

  // Exchange term of one pair (i < j) on an n_qubits state: for every
  // bitstring b with bit i = 0 and bit j = 1 and its partner b ^ mask,
  //   out[b] += c * in[b ^ mask],  out[b ^ mask] += c * in[b].
  void (*flip_flop)(unsigned n_qubits, unsigned i, unsigned j, double c, const double* in, double* out);

  // Dense row-major product b = jmat * s with jmat n x n and s, b n x width.
  void (*field)(std::size_t n, std::size_t width, const double* jmat, const double* s, double* b);

  // Classical torque for n spins each holding `lanes` trajectories. Rows of
  // s, b, d have layout [x(lanes) | y(lanes) | z(lanes)]. Computes
  //   d = s x (cxy*bx + ex, cxy*by + ey, cz*bz + ez).
  void (*torque)(std::size_t n, std::size_t lanes, const double* s, const double* b,
                 const TorqueParams& p, double* d);
};

const KernelTable& scalar_table();

// Returns nullptr when the host or the build lacks AVX2+FMA.
const KernelTable* avx2_table();

bool isa_available(Isa isa);

// Process-wide active table. Chosen on first use; set_active() is intended
// for tests and benchmarks and must not race with running computations.
const KernelTable& active();
void set_active(Isa isa);

}  // namespace xxz::kernels
