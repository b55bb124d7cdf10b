#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Dense double-precision inner loops. Every instruction-set variant performs
// the same IEEE operations in the same order (no fused multiply-add, no
// reassociated reductions), so all variants produce bitwise-identical output.

namespace transicd::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa) noexcept;
Isa parse_isa(std::string_view name);

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // c[m x p] += a[m x k] * b[k x p], row-major, accumulated over k in order.
  void (*gemm_acc)(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t p);
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out += a * b
  void (*mul_acc)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // out += a
  void (*accumulate)(const double* a, double* out, std::size_t n);
  void (*adam)(double* w, double* m, double* v, const double* g, std::size_t n,
               const AdamCoeffs& c);
};

const KernelTable& scalar_table() noexcept;
#if defined(TRANSICD_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(TRANSICD_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif

// True when the variant was compiled in and the running CPU supports it.
bool available(Isa isa) noexcept;
std::vector<Isa> available_isas();
Isa best_available() noexcept;

const KernelTable& table(Isa isa);

// The table used by tensor ops. Defaults to best_available().
const KernelTable& active() noexcept;
void select(Isa isa);

// Restores the previous selection on destruction.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace transicd::kernels
