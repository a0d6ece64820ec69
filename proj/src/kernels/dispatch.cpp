#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "xxz/error.hpp"

namespace xxz::kernels {

namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("XXZ_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2") {
      if (const KernelTable* t = avx2_table()) return t;
      throw Error(ErrorCode::ConfigError, "XXZ_ISA=avx2 requested but AVX2+FMA is unavailable");
    }
    if (!want.empty() && want != "auto") {
      throw Error(ErrorCode::ConfigError, "unknown XXZ_ISA value '" + want + "'");
    }
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "?";
}

bool isa_available(Isa isa) { return isa == Isa::Scalar || avx2_table() != nullptr; }

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  if (isa == Isa::Scalar) {
    slot().store(&scalar_table(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw Error(ErrorCode::ConfigError, "AVX2 kernels unavailable on this host");
  slot().store(t, std::memory_order_release);
}

}  // namespace xxz::kernels
