#include "transicd/kernels.hpp"

#include <atomic>
#include <string>

#include "transicd/error.hpp"

namespace transicd::kernels {
namespace {

bool cpu_supports(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(TRANSICD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(TRANSICD_HAVE_NEON)
      return true;  // Advanced SIMD is mandatory on AArch64.
#else
      return false;
#endif
  }
  return false;
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{&table(best_available())};
  return slot;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw Error(ErrorKind::config, "unknown instruction set '" + std::string(name) + "'");
}

bool available(Isa isa) noexcept { return cpu_supports(isa); }

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
    if (available(isa)) out.push_back(isa);
  return out;
}

Isa best_available() noexcept {
  if (available(Isa::avx2)) return Isa::avx2;
  if (available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

const KernelTable& table(Isa isa) {
  if (!available(isa))
    throw Error(ErrorKind::config,
                "instruction set '" + std::string(to_string(isa)) + "' is not available");
  switch (isa) {
#if defined(TRANSICD_HAVE_AVX2)
    case Isa::avx2:
      return avx2_table();
#endif
#if defined(TRANSICD_HAVE_NEON)
    case Isa::neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_acquire); }

void select(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

ScopedIsa::ScopedIsa(Isa isa) : previous_(active().isa) { select(isa); }

ScopedIsa::~ScopedIsa() { select(previous_); }

}  // namespace transicd::kernels
