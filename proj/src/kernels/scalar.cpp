#include "kernels_impl.hpp"

namespace xxz::kernels::scalar {

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

void caxpy(std::size_t n, double ar, double ai, const double* x, double* y) {
  for (std::size_t k = 0; k < n; ++k) {
    const double xr = x[2 * k];
    const double xi = x[2 * k + 1];
    y[2 * k] += ar * xr - ai * xi;
    y[2 * k + 1] += ar * xi + ai * xr;
  }
}

void cdot(std::size_t n, const double* x, const double* y, double* re, double* im) {
  double sr = 0.0;
  double si = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double xr = x[2 * k];
    const double xi = x[2 * k + 1];
    const double yr = y[2 * k];
    const double yi = y[2 * k + 1];
    sr += xr * yr + xi * yi;
    si += xr * yi - xi * yr;
  }
  *re = sr;
  *im = si;
}

void diag_mul(std::size_t n, const double* d, const double* in, double* out) {
  for (std::size_t k = 0; k < n; ++k) {
    out[2 * k] = d[k] * in[2 * k];
    out[2 * k + 1] = d[k] * in[2 * k + 1];
  }
}

void flip_flop(unsigned n_qubits, unsigned i, unsigned j, double c, const double* in, double* out) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t low = std::size_t{1} << i;
  const std::size_t high = std::size_t{1} << j;
  for (std::size_t top = 0; top < dim; top += 2 * high) {
    for (std::size_t mid = 0; mid < high; mid += 2 * low) {
      const std::size_t a = top + mid + high;  // bit j = 1, bit i = 0
      const std::size_t b = top + mid + low;   // bit j = 0, bit i = 1
      for (std::size_t k = 0; k < low; ++k) {
        const std::size_t ia = 2 * (a + k);
        const std::size_t ib = 2 * (b + k);
        out[ia] += c * in[ib];
        out[ia + 1] += c * in[ib + 1];
        out[ib] += c * in[ia];
        out[ib + 1] += c * in[ia + 1];
      }
    }
  }
}

void field(std::size_t n, std::size_t width, const double* jmat, const double* s, double* b) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = b + i * width;
    for (std::size_t w = 0; w < width; ++w) row[w] = 0.0;
    const double* jrow = jmat + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double jij = jrow[j];
      if (jij == 0.0) continue;
      const double* src = s + j * width;
      for (std::size_t w = 0; w < width; ++w) row[w] += jij * src[w];
    }
  }
}

void torque(std::size_t n, std::size_t lanes, const double* s, const double* b, const TorqueParams& p,
            double* d) {
  const std::size_t stride = 3 * lanes;
  for (std::size_t i = 0; i < n; ++i) {
    const double* sx = s + i * stride;
    const double* sy = sx + lanes;
    const double* sz = sy + lanes;
    const double* bx = b + i * stride;
    const double* by = bx + lanes;
    const double* bz = by + lanes;
    double* dx = d + i * stride;
    double* dy = dx + lanes;
    double* dz = dy + lanes;
    for (std::size_t t = 0; t < lanes; ++t) {
      const double fx = p.cxy * bx[t] + p.ex;
      const double fy = p.cxy * by[t] + p.ey;
      const double fz = p.cz * bz[t] + p.ez;
      dx[t] = sy[t] * fz - sz[t] * fy;
      dy[t] = sz[t] * fx - sx[t] * fz;
      dz[t] = sx[t] * fy - sy[t] * fx;
    }
  }
}

}  // namespace xxz::kernels::scalar

namespace xxz::kernels {

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar,        scalar::axpy,  scalar::caxpy, scalar::cdot,
                                 scalar::diag_mul,   scalar::flip_flop, scalar::field, scalar::torque};
  return table;
}

}  // namespace xxz::kernels
