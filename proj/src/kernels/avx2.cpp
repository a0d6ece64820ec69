#include "kernels_impl.hpp"

#if defined(XXZ_HAVE_X86_DISPATCH)

#include <immintrin.h>

#define XXZ_AVX2 __attribute__((target("avx2,fma")))

namespace xxz::kernels::avx2 {

namespace {

XXZ_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

XXZ_AVX2 void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
  }
  for (; k < n; ++k) y[k] += a * x[k];
}

XXZ_AVX2 void caxpy(std::size_t n, double ar, double ai, const double* x, double* y) {
  const __m256d var = _mm256_set1_pd(ar);
  const __m256d vai = _mm256_set1_pd(ai);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vx = _mm256_loadu_pd(x + 2 * k);
    const __m256d vs = _mm256_permute_pd(vx, 0x5);  // (xi, xr) pairs
    const __m256d t = _mm256_addsub_pd(_mm256_mul_pd(var, vx), _mm256_mul_pd(vai, vs));
    _mm256_storeu_pd(y + 2 * k, _mm256_add_pd(_mm256_loadu_pd(y + 2 * k), t));
  }
  for (; k < n; ++k) {
    const double xr = x[2 * k];
    const double xi = x[2 * k + 1];
    y[2 * k] += ar * xr - ai * xi;
    y[2 * k + 1] += ar * xi + ai * xr;
  }
}

XXZ_AVX2 void cdot(std::size_t n, const double* x, const double* y, double* re, double* im) {
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vx = _mm256_loadu_pd(x + 2 * k);
    const __m256d vy = _mm256_loadu_pd(y + 2 * k);
    acc_re = _mm256_fmadd_pd(vx, vy, acc_re);
    acc_im = _mm256_fmadd_pd(vx, _mm256_permute_pd(vy, 0x5), acc_im);
  }
  double sr = hsum(acc_re);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc_im);
  double si = (lanes[0] + lanes[2]) - (lanes[1] + lanes[3]);
  for (; k < n; ++k) {
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

XXZ_AVX2 void diag_mul(std::size_t n, const double* d, const double* in, double* out) {
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const __m256d vd = _mm256_set_pd(d[k + 1], d[k + 1], d[k], d[k]);
    _mm256_storeu_pd(out + 2 * k, _mm256_mul_pd(vd, _mm256_loadu_pd(in + 2 * k)));
  }
  for (; k < n; ++k) {
    out[2 * k] = d[k] * in[2 * k];
    out[2 * k + 1] = d[k] * in[2 * k + 1];
  }
}

XXZ_AVX2 void flip_flop(unsigned n_qubits, unsigned i, unsigned j, double c, const double* in, double* out) {
  const std::size_t low = std::size_t{1} << i;
  if (low < 2) {
    scalar::flip_flop(n_qubits, i, j, c, in, out);
    return;
  }
  const std::size_t dim = std::size_t{1} << n_qubits;
  const std::size_t high = std::size_t{1} << j;
  const __m256d vc = _mm256_set1_pd(c);
  for (std::size_t top = 0; top < dim; top += 2 * high) {
    for (std::size_t mid = 0; mid < high; mid += 2 * low) {
      double* oa = out + 2 * (top + mid + high);
      double* ob = out + 2 * (top + mid + low);
      const double* pa = in + 2 * (top + mid + high);
      const double* pb = in + 2 * (top + mid + low);
      for (std::size_t k = 0; k < 2 * low; k += 4) {
        _mm256_storeu_pd(oa + k, _mm256_fmadd_pd(vc, _mm256_loadu_pd(pb + k), _mm256_loadu_pd(oa + k)));
        _mm256_storeu_pd(ob + k, _mm256_fmadd_pd(vc, _mm256_loadu_pd(pa + k), _mm256_loadu_pd(ob + k)));
      }
    }
  }
}

// Register tile: 4 rows of b by 12 columns (12 accumulators). Each step of
// the j loop loads 3 vectors of s and broadcasts 4 couplings.
XXZ_AVX2 void field(std::size_t n, std::size_t width, const double* jmat, const double* s, double* b) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* j0 = jmat + i * n;
    const double* j1 = j0 + n;
    const double* j2 = j1 + n;
    const double* j3 = j2 + n;
    double* b0 = b + i * width;
    double* b1 = b0 + width;
    double* b2 = b1 + width;
    double* b3 = b2 + width;
    std::size_t col = 0;
    for (; col + 12 <= width; col += 12) {
      __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd(), a02 = _mm256_setzero_pd();
      __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd(), a12 = _mm256_setzero_pd();
      __m256d a20 = _mm256_setzero_pd(), a21 = _mm256_setzero_pd(), a22 = _mm256_setzero_pd();
      __m256d a30 = _mm256_setzero_pd(), a31 = _mm256_setzero_pd(), a32 = _mm256_setzero_pd();
      const double* src = s + col;
      for (std::size_t j = 0; j < n; ++j, src += width) {
        const __m256d v0 = _mm256_loadu_pd(src);
        const __m256d v1 = _mm256_loadu_pd(src + 4);
        const __m256d v2 = _mm256_loadu_pd(src + 8);
        __m256d c = _mm256_broadcast_sd(j0 + j);
        a00 = _mm256_fmadd_pd(c, v0, a00);
        a01 = _mm256_fmadd_pd(c, v1, a01);
        a02 = _mm256_fmadd_pd(c, v2, a02);
        c = _mm256_broadcast_sd(j1 + j);
        a10 = _mm256_fmadd_pd(c, v0, a10);
        a11 = _mm256_fmadd_pd(c, v1, a11);
        a12 = _mm256_fmadd_pd(c, v2, a12);
        c = _mm256_broadcast_sd(j2 + j);
        a20 = _mm256_fmadd_pd(c, v0, a20);
        a21 = _mm256_fmadd_pd(c, v1, a21);
        a22 = _mm256_fmadd_pd(c, v2, a22);
        c = _mm256_broadcast_sd(j3 + j);
        a30 = _mm256_fmadd_pd(c, v0, a30);
        a31 = _mm256_fmadd_pd(c, v1, a31);
        a32 = _mm256_fmadd_pd(c, v2, a32);
      }
      _mm256_storeu_pd(b0 + col, a00);
      _mm256_storeu_pd(b0 + col + 4, a01);
      _mm256_storeu_pd(b0 + col + 8, a02);
      _mm256_storeu_pd(b1 + col, a10);
      _mm256_storeu_pd(b1 + col + 4, a11);
      _mm256_storeu_pd(b1 + col + 8, a12);
      _mm256_storeu_pd(b2 + col, a20);
      _mm256_storeu_pd(b2 + col + 4, a21);
      _mm256_storeu_pd(b2 + col + 8, a22);
      _mm256_storeu_pd(b3 + col, a30);
      _mm256_storeu_pd(b3 + col + 4, a31);
      _mm256_storeu_pd(b3 + col + 8, a32);
    }
    for (; col + 4 <= width; col += 4) {
      __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
      const double* src = s + col;
      for (std::size_t j = 0; j < n; ++j, src += width) {
        const __m256d v = _mm256_loadu_pd(src);
        a0 = _mm256_fmadd_pd(_mm256_broadcast_sd(j0 + j), v, a0);
        a1 = _mm256_fmadd_pd(_mm256_broadcast_sd(j1 + j), v, a1);
        a2 = _mm256_fmadd_pd(_mm256_broadcast_sd(j2 + j), v, a2);
        a3 = _mm256_fmadd_pd(_mm256_broadcast_sd(j3 + j), v, a3);
      }
      _mm256_storeu_pd(b0 + col, a0);
      _mm256_storeu_pd(b1 + col, a1);
      _mm256_storeu_pd(b2 + col, a2);
      _mm256_storeu_pd(b3 + col, a3);
    }
    for (; col < width; ++col) {
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = s[j * width + col];
        s0 += j0[j] * v;
        s1 += j1[j] * v;
        s2 += j2[j] * v;
        s3 += j3[j] * v;
      }
      b0[col] = s0;
      b1[col] = s1;
      b2[col] = s2;
      b3[col] = s3;
    }
  }
  for (; i < n; ++i) {
    // Trailing rows.
    const double* j0 = jmat + i * n;
    double* b0 = b + i * width;
    for (std::size_t w = 0; w < width; ++w) b0[w] = 0.0;
    for (std::size_t j = 0; j < n; ++j) axpy(width, j0[j], s + j * width, b0);
  }
}

XXZ_AVX2 void torque(std::size_t n, std::size_t lanes, const double* s, const double* b,
                     const TorqueParams& p, double* d) {
  const std::size_t stride = 3 * lanes;
  const __m256d cxy = _mm256_set1_pd(p.cxy);
  const __m256d cz = _mm256_set1_pd(p.cz);
  const __m256d ex = _mm256_set1_pd(p.ex);
  const __m256d ey = _mm256_set1_pd(p.ey);
  const __m256d ez = _mm256_set1_pd(p.ez);
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
    std::size_t t = 0;
    for (; t + 4 <= lanes; t += 4) {
      const __m256d vx = _mm256_loadu_pd(sx + t);
      const __m256d vy = _mm256_loadu_pd(sy + t);
      const __m256d vz = _mm256_loadu_pd(sz + t);
      const __m256d fx = _mm256_fmadd_pd(cxy, _mm256_loadu_pd(bx + t), ex);
      const __m256d fy = _mm256_fmadd_pd(cxy, _mm256_loadu_pd(by + t), ey);
      const __m256d fz = _mm256_fmadd_pd(cz, _mm256_loadu_pd(bz + t), ez);
      _mm256_storeu_pd(dx + t, _mm256_fmsub_pd(vy, fz, _mm256_mul_pd(vz, fy)));
      _mm256_storeu_pd(dy + t, _mm256_fmsub_pd(vz, fx, _mm256_mul_pd(vx, fz)));
      _mm256_storeu_pd(dz + t, _mm256_fmsub_pd(vx, fy, _mm256_mul_pd(vy, fx)));
    }
    for (; t < lanes; ++t) {
      const double fx = p.cxy * bx[t] + p.ex;
      const double fy = p.cxy * by[t] + p.ey;
      const double fz = p.cz * bz[t] + p.ez;
      dx[t] = sy[t] * fz - sz[t] * fy;
      dy[t] = sz[t] * fx - sx[t] * fz;
      dz[t] = sx[t] * fy - sy[t] * fx;
    }
  }
}

}  // namespace xxz::kernels::avx2

namespace xxz::kernels {

const KernelTable* avx2_table() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{Isa::Avx2,      avx2::axpy,      avx2::caxpy, avx2::cdot,
                                 avx2::diag_mul, avx2::flip_flop, avx2::field, avx2::torque};
  return supported ? &table : nullptr;
}

}  // namespace xxz::kernels

#else

namespace xxz::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace xxz::kernels

#endif
