#pragma once

#include "xxz/kernels.hpp"

namespace xxz::kernels::scalar {
void axpy(std::size_t n, double a, const double* x, double* y);
void caxpy(std::size_t n, double ar, double ai, const double* x, double* y);
void cdot(std::size_t n, const double* x, const double* y, double* re, double* im);
void diag_mul(std::size_t n, const double* d, const double* in, double* out);
void flip_flop(unsigned n_qubits, unsigned i, unsigned j, double c, const double* in, double* out);
void field(std::size_t n, std::size_t width, const double* jmat, const double* s, double* b);
void torque(std::size_t n, std::size_t lanes, const double* s, const double* b, const TorqueParams& p,
            double* d);
}  // namespace xxz::kernels::scalar
