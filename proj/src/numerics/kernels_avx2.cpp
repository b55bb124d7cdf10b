// Compiled with -mavx2 (and without -mfma); only reached after a runtime
// CPU check in kernels.cpp.
#include "transicd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace transicd::kernels {
namespace {

inline __m256d madd(__m256d acc, __m256d a, __m256d b) {
  return _mm256_add_pd(acc, _mm256_mul_pd(a, b));
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, madd(_mm256_loadu_pd(y + i), va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * p;
    const double* arow = a + i * k;
    std::size_t j = 0;
    // 16 output columns held in registers across the whole k loop.
    for (; j + 16 <= p; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const __m256d va = _mm256_set1_pd(arow[kk]);
        const double* brow = b + kk * p + j;
        c0 = madd(c0, va, _mm256_loadu_pd(brow));
        c1 = madd(c1, va, _mm256_loadu_pd(brow + 4));
        c2 = madd(c2, va, _mm256_loadu_pd(brow + 8));
        c3 = madd(c3, va, _mm256_loadu_pd(brow + 12));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= p; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t kk = 0; kk < k; ++kk)
        c0 = madd(c0, _mm256_set1_pd(arow[kk]), _mm256_loadu_pd(b + kk * p + j));
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < p; ++j) {
      double acc = crow[j];
      for (std::size_t kk = 0; kk < k; ++kk) acc = acc + arow[kk] * b[kk * p + j];
      crow[j] = acc;
    }
  }
}

template <typename VecOp, typename ScalarOp>
inline void binary(const double* a, const double* b, double* out, std::size_t n,
                   VecOp vop, ScalarOp sop) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = sop(a[i], b[i]);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); },
         [](double x, double y) { return x + y; });
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); },
         [](double x, double y) { return x - y; });
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  binary(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); },
         [](double x, double y) { return x * y; });
}

void mul_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, madd(_mm256_loadu_pd(out + i), _mm256_loadu_pd(a + i),
                                   _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = out[i] + a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vs));
  for (; i < n; ++i) out[i] = a[i] * s;
}

void accumulate(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = out[i] + a[i];
}

void adam(double* w, double* m, double* v, const double* g, std::size_t n,
          const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d nb1 = _mm256_set1_pd(one_minus_b1);
  const __m256d nb2 = _mm256_set1_pd(one_minus_b2);
  const __m256d bias1 = _mm256_set1_pd(c.bias1);
  const __m256d bias2 = _mm256_set1_pd(c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(nb1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(nb2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bias1);
    const __m256d v_hat = _mm256_div_pd(vi, bias2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat),
                                       _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    w[i] = w[i] - (c.lr * m_hat) / (std::sqrt(v_hat) + c.eps);
  }
}

constexpr KernelTable kAvx2{Isa::avx2, axpy, gemm_acc, add,        sub,
                            mul,       mul_acc, scale, accumulate, adam};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace transicd::kernels
