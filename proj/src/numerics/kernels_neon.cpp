#include "transicd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace transicd::kernels {
namespace {

// vmulq + vaddq rather than vfmaq: keeps rounding identical to the scalar path.
inline float64x2_t madd(float64x2_t acc, float64x2_t a, float64x2_t b) {
  return vaddq_f64(acc, vmulq_f64(a, b));
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, madd(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * p;
    const double* arow = a + i * k;
    std::size_t j = 0;
    for (; j + 8 <= p; j += 8) {
      float64x2_t c0 = vld1q_f64(crow + j);
      float64x2_t c1 = vld1q_f64(crow + j + 2);
      float64x2_t c2 = vld1q_f64(crow + j + 4);
      float64x2_t c3 = vld1q_f64(crow + j + 6);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const float64x2_t va = vdupq_n_f64(arow[kk]);
        const double* brow = b + kk * p + j;
        c0 = madd(c0, va, vld1q_f64(brow));
        c1 = madd(c1, va, vld1q_f64(brow + 2));
        c2 = madd(c2, va, vld1q_f64(brow + 4));
        c3 = madd(c3, va, vld1q_f64(brow + 6));
      }
      vst1q_f64(crow + j, c0);
      vst1q_f64(crow + j + 2, c1);
      vst1q_f64(crow + j + 4, c2);
      vst1q_f64(crow + j + 6, c3);
    }
    for (; j + 2 <= p; j += 2) {
      float64x2_t c0 = vld1q_f64(crow + j);
      for (std::size_t kk = 0; kk < k; ++kk)
        c0 = madd(c0, vdupq_n_f64(arow[kk]), vld1q_f64(b + kk * p + j));
      vst1q_f64(crow + j, c0);
    }
    for (; j < p; ++j) {
      double acc = crow[j];
      for (std::size_t kk = 0; kk < k; ++kk) acc = acc + arow[kk] * b[kk * p + j];
      crow[j] = acc;
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, madd(vld1q_f64(out + i), vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = out[i] + a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vs));
  for (; i < n; ++i) out[i] = a[i] * s;
}

void accumulate(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(out + i), vld1q_f64(a + i)));
  for (; i < n; ++i) out[i] = out[i] + a[i];
}

void adam(double* w, double* m, double* v, const double* g, std::size_t n,
          const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi = vaddq_f64(vmulq_f64(vdupq_n_f64(c.beta1), vld1q_f64(m + i)),
                                     vmulq_f64(vdupq_n_f64(one_minus_b1), gi));
    const float64x2_t vi = vaddq_f64(vmulq_f64(vdupq_n_f64(c.beta2), vld1q_f64(v + i)),
                                     vmulq_f64(vdupq_n_f64(one_minus_b2), vmulq_f64(gi, gi)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t m_hat = vdivq_f64(mi, vdupq_n_f64(c.bias1));
    const float64x2_t v_hat = vdivq_f64(vi, vdupq_n_f64(c.bias2));
    const float64x2_t step = vdivq_f64(vmulq_f64(vdupq_n_f64(c.lr), m_hat),
                                       vaddq_f64(vsqrtq_f64(v_hat), vdupq_n_f64(c.eps)));
    vst1q_f64(w + i, vsubq_f64(vld1q_f64(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    w[i] = w[i] - (c.lr * m_hat) / (std::sqrt(v_hat) + c.eps);
  }
}

constexpr KernelTable kNeon{Isa::neon, axpy, gemm_acc, add,        sub,
                            mul,       mul_acc, scale, accumulate, adam};

}  // namespace

const KernelTable& neon_table() noexcept { return kNeon; }

}  // namespace transicd::kernels
